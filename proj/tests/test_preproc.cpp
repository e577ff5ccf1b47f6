#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hifind/preproc.hpp"
#include "hifind/synth.hpp"
#include "test_util.hpp"

using namespace hifind;
using namespace hifind::preproc;

TEST_SUITE_BEGIN("preproc");

TEST_CASE("clip_normalize maps the window [-15,35] onto [0,1]") {
  CHECK(clip_normalize_value(35.0f) == 1.0f);
  CHECK(clip_normalize_value(-15.0f) == 0.0f);
  CHECK(clip_normalize_value(10.0f) == 0.5f);
  CHECK(clip_normalize_value(50.0f) == 1.0f);
  CHECK(clip_normalize_value(-100.0f) == 0.0f);
}

TEST_CASE("clip_normalize is monotone; the clip is idempotent on its image") {
  float prev = -1.0f;
  for (double x = -40.0; x <= 60.0; x += 0.25) {
    const float y = clip_normalize_value(float(x));
    CHECK(y >= prev);
    CHECK(y >= 0.0f);
    CHECK(y <= 1.0f);
    prev = y;
    // Undoing the affine part recovers the clipped value; clipping that
    // again is stable.
    const float clipped = 50.0f * y - 15.0f;
    CHECK(clip_normalize_value(clipped) == doctest::Approx(y).epsilon(1e-6));
  }
}

namespace {

SpectralCube column_cube(const std::vector<float>& values) {
  SpectralCube cube({int64_t(values.size()), 1, 1});
  cube.data = values;
  return cube;
}

}  // namespace

TEST_CASE("rebin_freq window means") {
  SUBCASE("1..10 gives [3.5, 7.5]") {
    auto out = rebin_freq(column_cube({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}));
    REQUIRE(out.shape.f == 2);
    CHECK(out.data[0] == doctest::Approx(3.5));
    CHECK(out.data[1] == doctest::Approx(7.5));
  }
  SUBCASE("survey-depth axis: 3930 -> 982") {
    CHECK(rebin_length(3930) == 982);
  }
  SUBCASE("constant cube stays constant") {
    auto out = rebin_freq(column_cube(std::vector<float>(40, 2.5f)));
    for (float v : out.data) CHECK(v == doctest::Approx(2.5));
  }
  SUBCASE("too-short axis is an error") {
    CHECK_THROWS_AS(rebin_freq(column_cube({1, 2, 3, 4, 5})), Error);
  }
}

TEST_CASE("rebin_freq matches a brute-force oracle on random columns") {
  Rng rng(20);
  for (int trial = 0; trial < 1000; ++trial) {
    const int64_t n = rng.uniform_int(6, 64);
    auto col = std::vector<float>(size_t(n));
    for (auto& v : col) v = float(rng.uniform(-10.0, 10.0));
    auto out = rebin_freq(column_cube(col));
    // Oracle: enumerate windows directly.
    std::vector<double> expect;
    for (int64_t start = 0; start + 6 <= n; start += 4) {
      double acc = 0.0;
      for (int64_t k = 0; k < 6; ++k) acc += col[size_t(start + k)];
      expect.push_back(acc / 6.0);
    }
    REQUIRE(out.shape.f == int64_t(expect.size()));
    for (size_t i = 0; i < expect.size(); ++i)
      CHECK(double(out.data[i]) == doctest::Approx(expect[i]).epsilon(1e-6));
  }
}

TEST_CASE("rebin_freq is linear") {
  Rng rng(21);
  SpectralCube x({30, 3, 3}), y({30, 3, 3});
  for (auto& v : x.data) v = float(rng.uniform(-5.0, 5.0));
  for (auto& v : y.data) v = float(rng.uniform(-5.0, 5.0));
  const double a = 1.7, b = -0.6;
  SpectralCube combo({30, 3, 3});
  for (size_t i = 0; i < combo.data.size(); ++i)
    combo.data[i] = float(a * x.data[i] + b * y.data[i]);
  auto lhs = rebin_freq(combo);
  auto rx = rebin_freq(x), ry = rebin_freq(y);
  for (size_t i = 0; i < lhs.data.size(); ++i)
    CHECK(double(lhs.data[i]) ==
          doctest::Approx(a * rx.data[i] + b * ry.data[i]).epsilon(1e-6));
}

TEST_CASE("rebin_mask any-hit semantics") {
  LabelVolume mask({12, 1, 1});
  SUBCASE("all-zero stays all-zero") {
    auto out = rebin_mask(mask);
    CHECK(out.foreground_count() == 0);
  }
  SUBCASE("single labeled voxel at f=5 lands in windows 0 and 1") {
    mask.at(5, 0, 0) = 1;
    auto out = rebin_mask(mask);
    REQUIRE(out.shape.f == 2);
    CHECK(out.at(0, 0, 0) == 1);  // window 0..5
    CHECK(out.at(1, 0, 0) == 1);  // window 4..9
  }
  SUBCASE("full mask stays full") {
    for (auto& v : mask.data) v = 1;
    auto out = rebin_mask(mask);
    CHECK(out.foreground_count() == out.voxels());
  }
}

TEST_CASE("crop_offsets") {
  SUBCASE("axis 64, patch 32, stride 16 -> {0,16,32}") {
    auto offs = crop_offsets({64, 1, 1}, {32, 1, 1}, {16, 1, 1});
    std::vector<int64_t> fs;
    for (auto& o : offs) fs.push_back(o.f);
    CHECK(fs == std::vector<int64_t>{0, 16, 32});
  }
  SUBCASE("axis 70, patch 32, stride 16 -> {0,16,32,38}") {
    auto offs = crop_offsets({70, 1, 1}, {32, 1, 1}, {16, 1, 1});
    std::vector<int64_t> fs;
    for (auto& o : offs) fs.push_back(o.f);
    CHECK(fs == std::vector<int64_t>{0, 16, 32, 38});
  }
  SUBCASE("short axis: single offset 0, padded extraction") {
    auto offs = crop_offsets({20, 1, 1}, {32, 1, 1}, {16, 1, 1});
    REQUIRE(offs.size() == 1);
    CHECK(offs[0].f == 0);
    SpectralCube cube = testutil::make_coded_cube({20, 1, 1});
    Patch p = extract_patch(cube, nullptr, offs[0], {32, 1, 1});
    CHECK(p.valid_extent.f == 20);
    CHECK(p.data[19] == cube.at(19, 0, 0));
    CHECK(p.data[20] == 0.0f);  // padding
  }
  SUBCASE("coverage: every voxel belongs to at least one window") {
    for (int64_t axis_len = 1; axis_len <= 128; ++axis_len) {
      auto offs = crop_offsets({axis_len, 1, 1}, {32, 1, 1}, {16, 1, 1});
      std::vector<bool> covered(size_t(axis_len), false);
      for (const auto& o : offs)
        for (int64_t i = o.f; i < std::min(axis_len, o.f + 32); ++i)
          covered[size_t(i)] = true;
      CHECK(std::all_of(covered.begin(), covered.end(),
                        [](bool b) { return b; }));
    }
  }
}

namespace {

Patch coded_patch(Vox3 shape) {
  SpectralCube cube = testutil::make_coded_cube(shape);
  LabelVolume mask(shape);
  mask.at(0, 0, 0) = 1;
  return extract_patch(cube, &mask, {0, 0, 0}, shape);
}

}  // namespace

TEST_CASE("flips") {
  SUBCASE("flip twice with the same decisions is the identity") {
    Patch p = coded_patch({4, 3, 5});
    Patch orig = p;
    flip_patch(p, {true, false, true});
    flip_patch(p, {true, false, true});
    CHECK(p.data == orig.data);
    CHECK(p.label == orig.label);
  }
  SUBCASE("flip_prob 0 is the identity") {
    Patch p = coded_patch({4, 3, 5});
    Patch orig = p;
    Rng rng(1);
    random_flip(p, rng, 0.0);
    CHECK(p.data == orig.data);
  }
  SUBCASE("full flip moves (0,0,0) to (1,1,1) on a 2x2x2 block") {
    Patch p;
    p.shape = {2, 2, 2};
    p.data.assign(8, 0.0f);
    p.label.assign(8, 0);
    p.data[0] = 7.0f;
    Rng rng(1);
    random_flip(p, rng, 1.0);
    CHECK(p.data[size_t(p.idx(1, 1, 1))] == 7.0f);
  }
  SUBCASE("flip preserves the multiset of values and moves labels with data") {
    Patch p = coded_patch({3, 4, 2});
    auto sorted_before = p.data;
    std::sort(sorted_before.begin(), sorted_before.end());
    // delta volume: find where the labeled voxel lands
    flip_patch(p, {true, true, false});
    auto sorted_after = p.data;
    std::sort(sorted_after.begin(), sorted_after.end());
    CHECK(sorted_before == sorted_after);
    CHECK(p.label[size_t(p.idx(2, 3, 0))] == 1);  // delta moved identically
    CHECK(p.data[size_t(p.idx(2, 3, 0))] == 0.0f);
  }
}

TEST_CASE("add_gaussian_noise") {
  SUBCASE("zero sigma is the identity") {
    Patch p = coded_patch({4, 4, 4});
    Patch orig = p;
    Rng rng(2);
    add_gaussian_noise(p, rng, {0.0, 0.0});
    CHECK(p.data == orig.data);
  }
  SUBCASE("noise statistics match the drawn sigma") {
    Patch p;
    p.shape = {32, 32, 32};
    p.data.assign(32768, 1.0f);
    p.label.assign(32768, 0);
    Rng rng(3);
    const double sigma = add_gaussian_noise(p, rng, {2.8, 3.8});
    double mean = 0.0;
    for (float v : p.data) mean += v - 1.0;
    mean /= 32768.0;
    double var = 0.0;
    for (float v : p.data) var += (v - 1.0 - mean) * (v - 1.0 - mean);
    const double std = std::sqrt(var / 32767.0);
    CHECK(std::abs(mean) < 0.05);
    CHECK(std::abs(std - sigma) < 0.05);
  }
}

TEST_CASE("cutmix_degrade") {
  // Known injected signal on an empty background.
  SpectralCube cube({64, 16, 16});
  LabelVolume mask({64, 16, 16});
  synth::SourceParams sp;
  sp.center = {32, 8, 8};
  sp.extent_freq = 30;
  sp.extent_ra = sp.extent_dec = 8;
  sp.amplitude = 20.0;
  synth::inject_source(cube, mask, sp, 1.0);
  REQUIRE(mask.foreground_count() > 0);

  SUBCASE("alpha = 1 leaves the cube unchanged") {
    SpectralCube copy = cube;
    Rng rng(4);
    cutmix_degrade(copy, mask, rng, {1.0, 1.0});
    for (size_t i = 0; i < copy.data.size(); ++i)
      CHECK(copy.data[i] == doctest::Approx(cube.data[i]).epsilon(1e-6));
  }
  SUBCASE("alpha = 0.5 halves the signal estimate at every masked voxel") {
    SpectralCube copy = cube;
    Rng rng(4);
    const double alpha = cutmix_degrade(copy, mask, rng, {0.5, 0.5});
    CHECK(alpha == 0.5);
    // Background is exactly zero here, so the local median is 0 and the
    // degraded value is alpha * original.
    for (size_t i = 0; i < copy.data.size(); ++i) {
      if (mask.data[i])
        CHECK(copy.data[i] == doctest::Approx(0.5 * cube.data[i])
                                  .epsilon(1e-5));
      else
        CHECK(copy.data[i] == cube.data[i]);
    }
  }
  SUBCASE("label volume is unchanged and empty masks are a no-op") {
    SpectralCube copy = cube;
    LabelVolume mask_copy = mask;
    Rng rng(4);
    cutmix_degrade(copy, mask_copy, rng, {0.3, 0.8});
    CHECK(mask_copy == mask);
    LabelVolume empty({64, 16, 16});
    SpectralCube copy2 = cube;
    const double alpha = cutmix_degrade(copy2, empty, rng, {0.3, 0.8});
    CHECK(alpha == 1.0);
    CHECK(copy2 == cube);
  }
}

TEST_CASE("sample_training_patches") {
  SpectralCube cube({128, 24, 24});
  LabelVolume mask({128, 24, 24});
  synth::SourceParams sp;
  sp.center = {64, 12, 12};
  sp.extent_freq = 40;
  sp.extent_ra = sp.extent_dec = 8;
  sp.amplitude = 20.0;
  synth::inject_source(cube, mask, sp, 1.0);
  const int64_t source_voxels = mask.foreground_count();
  REQUIRE(source_voxels > 0);

  SUBCASE("positives contain at least half of the source") {
    Rng rng(5);
    auto set = sample_training_patches(cube, mask, rng, 4, {64, 16, 16});
    REQUIRE(set.patches.size() == 4);
    CHECK(!set.no_sources);
    for (int i = 0; i < 2; ++i) {
      int64_t inside = 0;
      for (uint8_t l : set.patches[size_t(i)].label) inside += l;
      CHECK(inside * 2 >= source_voxels);
    }
  }
  SUBCASE("n = 0 gives an empty list") {
    Rng rng(5);
    CHECK(sample_training_patches(cube, mask, rng, 0, {64, 16, 16})
              .patches.empty());
  }
  SUBCASE("odd n is rejected") {
    Rng rng(5);
    CHECK_THROWS_AS(sample_training_patches(cube, mask, rng, 3, {64, 16, 16}),
                    Error);
  }
  SUBCASE("deterministic under a fixed seed") {
    Rng a(6), b(6);
    auto sa = sample_training_patches(cube, mask, a, 6, {64, 16, 16});
    auto sb = sample_training_patches(cube, mask, b, 6, {64, 16, 16});
    REQUIRE(sa.patches.size() == sb.patches.size());
    for (size_t i = 0; i < sa.patches.size(); ++i) {
      CHECK(sa.patches[i].offset == sb.patches[i].offset);
      CHECK(sa.patches[i].data == sb.patches[i].data);
    }
  }
  SUBCASE("no sources: all-negative with a warning flag") {
    LabelVolume empty({128, 24, 24});
    Rng rng(7);
    auto set = sample_training_patches(cube, empty, rng, 4, {64, 16, 16});
    CHECK(set.no_sources);
    CHECK(set.patches.size() == 4);  // all negative
    for (const auto& p : set.patches)
      CHECK(std::all_of(p.label.begin(), p.label.end(),
                        [](uint8_t v) { return v == 0; }));
  }
}

TEST_SUITE_END();

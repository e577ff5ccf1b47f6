#include "hifind/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hifind/detect.hpp"

namespace hifind::synth {

namespace {

// Profile geometry. Gaussian sigma is extent/4.7 so that the mask
// (contribution > 0.5 sigma_noise) spans roughly the requested extent at
// mid-range SNR. The double horn places two Gaussians of width s at +-c.
// Profiles are truncated at 2.6 sigma; the footprint is independent of
// amplitude, so scaling the amplitude scales every contributed voxel.
constexpr double kExtentToSigma = 1.0 / 4.7;
constexpr double kHornCenter = 1.0 / 4.35;
constexpr double kTruncationSigmas = 2.6;

struct Profile1d {
  // gaussian: p(x) = exp(-x^2 / (2 sigma^2))
  // horn:     p(x) = [g(x-c) + g(x+c)] / (1 + exp(-2 c^2/s^2)), s = c/2
  bool horn = false;
  double sigma = 1.0;  // gaussian sigma, or horn width s
  double c = 0.0;

  double eval(double x) const {
    if (!horn) return std::exp(-x * x / (2.0 * sigma * sigma));
    const double a = std::exp(-(x - c) * (x - c) / (2.0 * sigma * sigma));
    const double b = std::exp(-(x + c) * (x + c) / (2.0 * sigma * sigma));
    return (a + b) / (1.0 + std::exp(-2.0 * c * c / (sigma * sigma)));
  }
  double half_extent() const {
    return horn ? c + kTruncationSigmas * sigma : kTruncationSigmas * sigma;
  }
};

Profile1d freq_profile(const SourceParams& p) {
  Profile1d prof;
  if (p.profile == FreqProfile::double_horn) {
    prof.horn = true;
    prof.c = p.extent_freq * kHornCenter;
    prof.sigma = prof.c / 2.0;
  } else {
    prof.sigma = p.extent_freq * kExtentToSigma;
  }
  return prof;
}

}  // namespace

Vox3 source_footprint_half(const SourceParams& params) {
  const Profile1d pf = freq_profile(params);
  return {int64_t(std::ceil(pf.half_extent())),
          int64_t(std::ceil(kTruncationSigmas * params.extent_ra *
                            kExtentToSigma)),
          int64_t(std::ceil(kTruncationSigmas * params.extent_dec *
                            kExtentToSigma))};
}

void inject_source(SpectralCube& cube, LabelVolume& mask,
                   const SourceParams& params, double mask_threshold) {
  if (cube.shape != mask.shape)
    fail_data("cube and mask grids differ");
  const Vox3 half = source_footprint_half(params);
  for (int a = 0; a < 3; ++a)
    if (params.center[a] - half[a] < 0 ||
        params.center[a] + half[a] >= cube.shape[a])
      fail_data("source footprint out of bounds at axis " + std::to_string(a));

  const Profile1d pf = freq_profile(params);
  const double sr = params.extent_ra * kExtentToSigma;
  const double sd = params.extent_dec * kExtentToSigma;

  for (int64_t f = params.center.f - half.f; f <= params.center.f + half.f;
       ++f) {
    const double wf = pf.eval(double(f - params.center.f));
    for (int64_t r = params.center.r - half.r; r <= params.center.r + half.r;
         ++r) {
      const double dr = double(r - params.center.r);
      const double wr = std::exp(-dr * dr / (2.0 * sr * sr));
      for (int64_t d = params.center.d - half.d;
           d <= params.center.d + half.d; ++d) {
        const double dd = double(d - params.center.d);
        const double wd = std::exp(-dd * dd / (2.0 * sd * sd));
        const double contrib = params.amplitude * wf * wr * wd;
        const int64_t i = cube.idx(f, r, d);
        cube.data[size_t(i)] += float(contrib);
        if (contrib > mask_threshold) mask.data[size_t(i)] = 1;
      }
    }
  }
}

void inject_rfi(SpectralCube& cube, const RfiSpec& rfi, double sigma) {
  if (rfi.strength <= 0.0) fail_data("RFI strength must be > 0");
  Vox3 lo = rfi.lo, hi = rfi.hi;
  if (rfi.kind == RfiKind::narrowband_persistent) {
    lo.r = lo.d = 0;
    hi.r = cube.shape.r - 1;
    hi.d = cube.shape.d - 1;
  } else {
    lo.f = 0;
    hi.f = cube.shape.f - 1;
  }
  for (int a = 0; a < 3; ++a)
    if (lo[a] < 0 || hi[a] >= cube.shape[a] || lo[a] > hi[a])
      fail_data("RFI extent out of bounds at axis " + std::to_string(a));
  const float add = float(rfi.strength * sigma);
  for (int64_t f = lo.f; f <= hi.f; ++f)
    for (int64_t r = lo.r; r <= hi.r; ++r)
      for (int64_t d = lo.d; d <= hi.d; ++d)
        cube.data[size_t(cube.idx(f, r, d))] += add;
}

void SynthSpec::validate() const {
  if (cube_shape.f < 1 || cube_shape.r < 1 || cube_shape.d < 1)
    fail_usage("cube shape components must be >= 1");
  if (noise_sigma.first > noise_sigma.second ||
      source_extent_freq.first > source_extent_freq.second ||
      source_extent_spatial.first > source_extent_spatial.second ||
      source_amplitude_snr.first > source_amplitude_snr.second)
    fail_usage("spec ranges must be ordered lo <= hi");
  if (noise_sigma.first < 0.0) fail_usage("noise sigma must be >= 0");
  if (n_sources < 0) fail_usage("n_sources must be >= 0");
  for (const auto& r : rfi)
    if (r.strength <= 0.0) fail_usage("RFI strength must be > 0");
  if (n_sources > 0) {
    // The largest possible footprint (either profile family) must fit.
    SourceParams biggest;
    biggest.extent_freq = double(source_extent_freq.second);
    biggest.extent_ra = biggest.extent_dec =
        double(source_extent_spatial.second);
    for (auto profile : {FreqProfile::gaussian, FreqProfile::double_horn}) {
      biggest.profile = profile;
      const Vox3 half = source_footprint_half(biggest);
      for (int a = 0; a < 3; ++a)
        if (2 * half[a] + 1 > cube_shape[a])
          fail_usage("cube shape too small for max source extent on axis " +
                     std::to_string(a));
    }
  }
}

SynthResult synth_cube(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  SynthResult out;
  out.cube = SpectralCube(spec.cube_shape);
  out.mask = LabelVolume(spec.cube_shape);
  out.noise_sigma = rng.uniform(spec.noise_sigma.first,
                                spec.noise_sigma.second);
  const double mask_threshold = 0.5 * out.noise_sigma;

  // Source shapes and strengths are drawn first; placement then
  // rejection-samples the whole configuration. A per-source retry alone
  // can dead-end (an unlucky first center may leave no room at all), so
  // exhausting the inner retries restarts the full placement.
  std::vector<SourceParams> sources(size_t(spec.n_sources));
  for (auto& p : sources) {
    p.extent_freq = double(rng.uniform_int(spec.source_extent_freq.first,
                                           spec.source_extent_freq.second));
    p.extent_ra = double(rng.uniform_int(spec.source_extent_spatial.first,
                                         spec.source_extent_spatial.second));
    p.extent_dec = double(rng.uniform_int(spec.source_extent_spatial.first,
                                          spec.source_extent_spatial.second));
    p.profile = rng.bernoulli(0.5) ? FreqProfile::double_horn
                                   : FreqProfile::gaussian;
    const double snr = rng.uniform(spec.source_amplitude_snr.first,
                                   spec.source_amplitude_snr.second);
    p.amplitude = snr * out.noise_sigma;
    out.source_snr.push_back(snr);
  }

  // Inflated footprint boxes must stay disjoint; the gap keeps components
  // separate even after frequency rebin.
  const Vox3 gap{4, 2, 2};
  bool all_placed = spec.n_sources == 0;
  for (int restart = 0; restart < 100 && !all_placed; ++restart) {
    std::vector<std::pair<Vox3, Vox3>> occupied;
    all_placed = true;
    for (auto& p : sources) {
      const Vox3 half = source_footprint_half(p);
      bool placed = false;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        Vox3 center;
        bool fits = true;
        for (int a = 0; a < 3; ++a) {
          const int64_t lo = half[a];
          const int64_t hi = spec.cube_shape[a] - 1 - half[a];
          if (lo > hi) {
            fits = false;
            break;
          }
          center[a] = rng.uniform_int(lo, hi);
        }
        if (!fits) break;
        Vox3 blo, bhi;
        for (int a = 0; a < 3; ++a) {
          blo[a] = center[a] - half[a] - gap[a];
          bhi[a] = center[a] + half[a] + gap[a];
        }
        bool overlaps = false;
        for (const auto& [olo, ohi] : occupied) {
          bool disjoint = false;
          for (int a = 0; a < 3; ++a)
            if (bhi[a] < olo[a] || blo[a] > ohi[a]) disjoint = true;
          if (!disjoint) {
            overlaps = true;
            break;
          }
        }
        if (overlaps) continue;
        p.center = center;
        occupied.emplace_back(blo, bhi);
        placed = true;
      }
      if (!placed) {
        all_placed = false;
        break;
      }
    }
  }
  if (!all_placed)
    fail_data("source placement failed after bounded retries (cube too "
              "crowded or too small)");
  for (const auto& p : sources)
    inject_source(out.cube, out.mask, p, mask_threshold);

  if (spec.ripple_amplitude != 0.0) {
    const double period = rng.uniform(double(spec.cube_shape.f) / 4.0,
                                      double(spec.cube_shape.f) / 2.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int64_t plane = spec.cube_shape.r * spec.cube_shape.d;
    for (int64_t f = 0; f < spec.cube_shape.f; ++f) {
      const float ripple = float(
          spec.ripple_amplitude *
          std::sin(2.0 * std::numbers::pi * double(f) / period + phase));
      for (int64_t pidx = 0; pidx < plane; ++pidx)
        out.cube.data[size_t(f * plane + pidx)] += ripple;
    }
  }

  if (out.noise_sigma > 0.0)
    for (float& v : out.cube.data)
      v = float(v + rng.normal(0.0, out.noise_sigma));

  // RFI last and with no further draws, so an RFI-free spec with the same
  // seed produces the identical cube minus the stripes.
  for (const auto& r : spec.rfi) inject_rfi(out.cube, r, out.noise_sigma);

  out.catalog = detect::connected_components(out.mask, 26, &out.cube).records;
  return out;
}

std::vector<RfiSpec> make_random_rfi(Vox3 shape, int64_t n_narrowband,
                                     std::pair<int64_t, int64_t> nb_channels,
                                     double nb_strength, int64_t n_broadband,
                                     std::pair<int64_t, int64_t> bb_width,
                                     double bb_strength, Rng& rng) {
  std::vector<RfiSpec> out;
  for (int64_t i = 0; i < n_narrowband; ++i) {
    RfiSpec r;
    r.kind = RfiKind::narrowband_persistent;
    r.strength = nb_strength;
    const int64_t width =
        std::min(rng.uniform_int(nb_channels.first, nb_channels.second),
                 shape.f);
    r.lo.f = rng.uniform_int(0, shape.f - width);
    r.hi.f = r.lo.f + width - 1;
    out.push_back(r);
  }
  for (int64_t i = 0; i < n_broadband; ++i) {
    RfiSpec r;
    r.kind = RfiKind::broadband_burst;
    r.strength = bb_strength;
    const int64_t wr =
        std::min(rng.uniform_int(bb_width.first, bb_width.second), shape.r);
    const int64_t wd =
        std::min(rng.uniform_int(bb_width.first, bb_width.second), shape.d);
    r.lo.r = rng.uniform_int(0, shape.r - wr);
    r.hi.r = r.lo.r + wr - 1;
    r.lo.d = rng.uniform_int(0, shape.d - wd);
    r.hi.d = r.lo.d + wd - 1;
    out.push_back(r);
  }
  return out;
}

}  // namespace hifind::synth

#include "hifind/preproc.hpp"

#include <algorithm>
#include <cmath>

#include "hifind/detect.hpp"

namespace hifind::preproc {

void clip_normalize(std::vector<float>& values) {
  for (float& v : values) v = clip_normalize_value(v);
}

SpectralCube clip_normalize(const SpectralCube& cube) {
  SpectralCube out = cube;
  clip_normalize(out.data);
  return out;
}

SpectralCube rebin_freq(const SpectralCube& cube) {
  if (cube.shape.f < kRebinKernel)
    fail_data("rebin_freq requires n_freq >= " + std::to_string(kRebinKernel) +
              ", got " + std::to_string(cube.shape.f));
  Vox3 out_shape{rebin_length(cube.shape.f), cube.shape.r, cube.shape.d};
  SpectralCube out(out_shape);
  out.freq_res = cube.freq_res * double(kRebinStride);
  out.spatial_res = cube.spatial_res;
  out.origin = cube.origin;
  // Output voxel centers sit mid-window on the original grid.
  out.origin[0] += cube.freq_res * double(kRebinKernel - 1) / 2.0;

  const int64_t plane = cube.shape.r * cube.shape.d;
  for (int64_t of = 0; of < out_shape.f; ++of) {
    const int64_t base = of * kRebinStride;
    for (int64_t p = 0; p < plane; ++p) {
      double acc = 0.0;
      for (int64_t k = 0; k < kRebinKernel; ++k)
        acc += cube.data[(base + k) * plane + p];
      out.data[of * plane + p] = float(acc / double(kRebinKernel));
    }
  }
  return out;
}

LabelVolume rebin_mask(const LabelVolume& mask) {
  if (mask.shape.f < kRebinKernel)
    fail_data("rebin_mask requires n_freq >= " + std::to_string(kRebinKernel));
  Vox3 out_shape{rebin_length(mask.shape.f), mask.shape.r, mask.shape.d};
  LabelVolume out(out_shape);
  const int64_t plane = mask.shape.r * mask.shape.d;
  for (int64_t of = 0; of < out_shape.f; ++of) {
    const int64_t base = of * kRebinStride;
    for (int64_t p = 0; p < plane; ++p) {
      int32_t m = 0;
      for (int64_t k = 0; k < kRebinKernel; ++k)
        m = std::max(m, mask.data[(base + k) * plane + p]);
      out.data[of * plane + p] = m;
    }
  }
  return out;
}

namespace {

std::vector<int64_t> axis_offsets(int64_t axis_len, int64_t patch_len,
                                  int64_t stride) {
  std::vector<int64_t> offs;
  if (axis_len <= patch_len) {
    offs.push_back(0);
    return offs;
  }
  for (int64_t o = 0; o + patch_len <= axis_len; o += stride)
    offs.push_back(o);
  if (offs.back() + patch_len < axis_len) offs.push_back(axis_len - patch_len);
  return offs;
}

}  // namespace

std::vector<Vox3> crop_offsets(Vox3 cube_shape, Vox3 patch_shape,
                               Vox3 stride) {
  if (patch_shape.f < 1 || patch_shape.r < 1 || patch_shape.d < 1)
    fail_usage("patch shape must be positive, got " + to_string(patch_shape));
  if (stride.f < 1 || stride.r < 1 || stride.d < 1)
    fail_usage("stride must be positive, got " + to_string(stride));
  auto fo = axis_offsets(cube_shape.f, patch_shape.f, stride.f);
  auto ro = axis_offsets(cube_shape.r, patch_shape.r, stride.r);
  auto d0 = axis_offsets(cube_shape.d, patch_shape.d, stride.d);
  std::vector<Vox3> out;
  out.reserve(fo.size() * ro.size() * d0.size());
  for (int64_t f : fo)
    for (int64_t r : ro)
      for (int64_t d : d0) out.push_back({f, r, d});
  return out;
}

Patch extract_patch(const SpectralCube& cube, const LabelVolume* mask,
                    Vox3 offset, Vox3 patch_shape) {
  if (offset.f < 0 || offset.r < 0 || offset.d < 0)
    fail_usage("patch offset must be non-negative");
  Patch p;
  p.shape = patch_shape;
  p.offset = offset;
  for (int a = 0; a < 3; ++a)
    p.valid_extent[a] =
        std::clamp<int64_t>(cube.shape[a] - offset[a], 0, patch_shape[a]);
  if (p.valid_extent.f == 0 || p.valid_extent.r == 0 || p.valid_extent.d == 0)
    fail_usage("patch offset " + to_string(offset) + " outside cube " +
               to_string(cube.shape));
  p.data.assign(size_t(patch_shape.voxels()), 0.0f);
  p.label.assign(size_t(patch_shape.voxels()), 0);
  for (int64_t f = 0; f < p.valid_extent.f; ++f)
    for (int64_t r = 0; r < p.valid_extent.r; ++r) {
      const int64_t src =
          cube.idx(offset.f + f, offset.r + r, offset.d);
      const int64_t dst = p.idx(f, r, 0);
      for (int64_t d = 0; d < p.valid_extent.d; ++d) {
        p.data[dst + d] = cube.data[src + d];
        if (mask) p.label[dst + d] = mask->data[src + d] != 0 ? 1 : 0;
      }
    }
  return p;
}

void flip_patch(Patch& patch, const std::array<bool, 3>& axes) {
  const Vox3 s = patch.shape;
  auto flipped = [&](int64_t f, int64_t r, int64_t d) {
    return patch.idx(axes[0] ? s.f - 1 - f : f, axes[1] ? s.r - 1 - r : r,
                     axes[2] ? s.d - 1 - d : d);
  };
  std::vector<float> data(patch.data.size());
  std::vector<uint8_t> label(patch.label.size());
  for (int64_t f = 0; f < s.f; ++f)
    for (int64_t r = 0; r < s.r; ++r)
      for (int64_t d = 0; d < s.d; ++d) {
        const int64_t dst = patch.idx(f, r, d);
        const int64_t src = flipped(f, r, d);
        data[dst] = patch.data[src];
        label[dst] = patch.label[src];
      }
  patch.data = std::move(data);
  patch.label = std::move(label);
}

std::array<bool, 3> random_flip(Patch& patch, Rng& rng, double flip_prob) {
  std::array<bool, 3> axes{rng.bernoulli(flip_prob), rng.bernoulli(flip_prob),
                           rng.bernoulli(flip_prob)};
  flip_patch(patch, axes);
  return axes;
}

double add_gaussian_noise(Patch& patch, Rng& rng,
                          std::pair<double, double> sigma_range, double mu) {
  const double sigma = rng.uniform(sigma_range.first, sigma_range.second);
  if (sigma == 0.0 && mu == 0.0) return sigma;
  for (float& v : patch.data) v = float(v + rng.normal(mu, sigma));
  return sigma;
}

double cutmix_degrade(std::vector<float>& data,
                      const std::vector<int32_t>& label, Vox3 shape, Rng& rng,
                      std::pair<double, double> intensity_range) {
  LabelVolume mask(shape);
  mask.data = label;
  auto comps = detect::connected_components(mask, 26);
  if (comps.records.empty()) return 1.0;

  const auto& rec =
      comps.records[size_t(rng.uniform_int(0, int64_t(comps.records.size()) - 1))];
  const double alpha =
      rng.uniform(intensity_range.first, intensity_range.second);

  // Local background: median of unlabeled voxels in the bbox inflated by 3.
  Vox3 lo, hi;
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max<int64_t>(0, rec.bbox_min[a] - 3);
    hi[a] = std::min<int64_t>(shape[a] - 1, rec.bbox_max[a] + 3);
  }
  std::vector<float> bg;
  for (int64_t f = lo.f; f <= hi.f; ++f)
    for (int64_t r = lo.r; r <= hi.r; ++r)
      for (int64_t d = lo.d; d <= hi.d; ++d) {
        const int64_t i = linear_index(shape, f, r, d);
        if (label[size_t(i)] == 0) bg.push_back(data[size_t(i)]);
      }
  if (bg.empty())
    for (size_t i = 0; i < data.size(); ++i)
      if (label[i] == 0) bg.push_back(data[i]);
  double m = 0.0;
  if (!bg.empty()) {
    size_t mid = bg.size() / 2;
    std::nth_element(bg.begin(), bg.begin() + mid, bg.end());
    m = bg[mid];
  }

  for (int64_t f = rec.bbox_min.f; f <= rec.bbox_max.f; ++f)
    for (int64_t r = rec.bbox_min.r; r <= rec.bbox_max.r; ++r)
      for (int64_t d = rec.bbox_min.d; d <= rec.bbox_max.d; ++d) {
        const int64_t i = linear_index(shape, f, r, d);
        if (comps.labels.data[size_t(i)] == rec.id)
          data[size_t(i)] = float(m + alpha * (data[size_t(i)] - m));
      }
  return alpha;
}

double cutmix_degrade(SpectralCube& cube, const LabelVolume& mask, Rng& rng,
                      std::pair<double, double> intensity_range) {
  return cutmix_degrade(cube.data, mask.data, cube.shape, rng,
                        intensity_range);
}

double cutmix_degrade(Patch& patch, Rng& rng,
                      std::pair<double, double> intensity_range) {
  std::vector<int32_t> label(patch.label.begin(), patch.label.end());
  return cutmix_degrade(patch.data, label, patch.shape, rng, intensity_range);
}

namespace {

int64_t overlap_count(const LabelVolume& labels, int32_t comp_id, Vox3 offset,
                      Vox3 patch_shape) {
  int64_t n = 0;
  Vox3 lo = offset;
  Vox3 hi;
  for (int a = 0; a < 3; ++a)
    hi[a] = std::min(labels.shape[a], offset[a] + patch_shape[a]);
  for (int64_t f = lo.f; f < hi.f; ++f)
    for (int64_t r = lo.r; r < hi.r; ++r)
      for (int64_t d = lo.d; d < hi.d; ++d)
        n += labels.at(f, r, d) == comp_id;
  return n;
}

}  // namespace

SampleSet sample_training_patches(const SpectralCube& cube,
                                  const LabelVolume& mask, Rng& rng, int64_t n,
                                  Vox3 patch_shape) {
  if (n % 2 != 0) fail_usage("sample count must be even, got " +
                             std::to_string(n));
  SampleSet out;
  if (n == 0) return out;

  auto comps = detect::connected_components(mask, 26);
  out.no_sources = comps.records.empty();

  auto negative_offset = [&]() {
    Vox3 off;
    for (int a = 0; a < 3; ++a)
      off[a] = rng.uniform_int(0, std::max<int64_t>(0, cube.shape[a] -
                                                           patch_shape[a]));
    return off;
  };

  const int64_t n_pos = out.no_sources ? 0 : n / 2;
  for (int64_t i = 0; i < n_pos; ++i) {
    const auto& rec = comps.records[size_t(
        rng.uniform_int(0, int64_t(comps.records.size()) - 1))];
    Vox3 best_off{};
    int64_t best_overlap = -1;
    for (int attempt = 0; attempt < 20; ++attempt) {
      Vox3 off;
      for (int a = 0; a < 3; ++a) {
        const int64_t extent = rec.bbox_max[a] - rec.bbox_min[a] + 1;
        if (extent <= patch_shape[a]) {
          // Any offset here makes the patch cover the whole bbox.
          const int64_t lo =
              std::max<int64_t>(0, rec.bbox_max[a] - patch_shape[a] + 1);
          const int64_t hi = rec.bbox_min[a];
          off[a] = rng.uniform_int(lo, hi);
        } else {
          const int64_t center = (rec.bbox_min[a] + rec.bbox_max[a]) / 2;
          const int64_t jitter = rng.uniform_int(-extent / 4, extent / 4);
          off[a] = std::clamp<int64_t>(center - patch_shape[a] / 2 + jitter, 0,
                                       std::max<int64_t>(0, cube.shape[a] -
                                                                patch_shape[a]));
        }
      }
      const int64_t ov = overlap_count(comps.labels, int32_t(rec.id), off,
                                       patch_shape);
      if (ov > best_overlap) {
        best_overlap = ov;
        best_off = off;
      }
      if (ov * 2 >= rec.n_voxels) break;
    }
    out.patches.push_back(extract_patch(cube, &mask, best_off, patch_shape));
  }
  for (int64_t i = n_pos; i < n; ++i)
    out.patches.push_back(
        extract_patch(cube, &mask, negative_offset(), patch_shape));
  return out;
}

}  // namespace hifind::preproc

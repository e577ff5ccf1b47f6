#include "hifind/detect.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hifind::detect {

OverlapAccumulator::OverlapAccumulator(Vox3 cube_shape)
    : shape_(cube_shape),
      sum_(size_t(cube_shape.voxels()), 0.0),
      count_(size_t(cube_shape.voxels()), 0) {}

void OverlapAccumulator::add(const preproc::Patch& patch,
                             std::span<const float> prob) {
  if (int64_t(prob.size()) != patch.shape.voxels())
    fail_internal("prediction block does not match patch shape");
  for (int64_t f = 0; f < patch.valid_extent.f; ++f)
    for (int64_t r = 0; r < patch.valid_extent.r; ++r) {
      const int64_t src = patch.idx(f, r, 0);
      const int64_t dst = linear_index(shape_, patch.offset.f + f,
                                       patch.offset.r + r, patch.offset.d);
      for (int64_t d = 0; d < patch.valid_extent.d; ++d) {
        sum_[size_t(dst + d)] += prob[size_t(src + d)];
        count_[size_t(dst + d)] += 1;
      }
    }
}

ProbabilityCube OverlapAccumulator::finalize() const {
  ProbabilityCube out;
  out.shape = shape_;
  out.values.resize(sum_.size());
  out.coverage = count_;
  for (size_t i = 0; i < sum_.size(); ++i)
    out.values[i] = count_[i] > 0 ? float(sum_[i] / count_[i]) : 0.0f;
  return out;
}

ProbabilityCube sliding_window_infer(const SpectralCube& cube,
                                     Vox3 patch_shape, Vox3 stride,
                                     const PatchModel& model) {
  OverlapAccumulator acc(cube.shape);
  std::vector<float> prob(size_t(patch_shape.voxels()));
  for (const Vox3& off : preproc::crop_offsets(cube.shape, patch_shape,
                                               stride)) {
    preproc::Patch patch = preproc::extract_patch(cube, nullptr, off,
                                                  patch_shape);
    model(patch, prob);
    acc.add(patch, prob);
  }
  return acc.finalize();
}

LabelVolume binarize(const ProbabilityCube& prob, double threshold) {
  LabelVolume out(prob.shape);
  for (size_t i = 0; i < prob.values.size(); ++i)
    out.data[i] = prob.values[i] > threshold ? 1 : 0;
  return out;
}

namespace {

// Neighbor offsets for 6- and 26-connectivity.
std::vector<Vox3> neighbor_offsets(int connectivity) {
  std::vector<Vox3> out;
  if (connectivity == 6) {
    out = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  } else if (connectivity == 26) {
    for (int64_t f = -1; f <= 1; ++f)
      for (int64_t r = -1; r <= 1; ++r)
        for (int64_t d = -1; d <= 1; ++d)
          if (f || r || d) out.push_back({f, r, d});
  } else {
    fail_usage("connectivity must be 6 or 26");
  }
  return out;
}

}  // namespace

Components connected_components(const LabelVolume& mask, int connectivity,
                                const SpectralCube* intensity) {
  if (intensity && intensity->shape != mask.shape)
    fail_data("intensity cube grid does not match mask grid");
  const auto nbs = neighbor_offsets(connectivity);
  const Vox3 s = mask.shape;

  Components out;
  out.labels = LabelVolume(s);
  std::vector<int64_t> stack;
  int32_t next_id = 0;

  for (int64_t f = 0; f < s.f; ++f)
    for (int64_t r = 0; r < s.r; ++r)
      for (int64_t d = 0; d < s.d; ++d) {
        const int64_t seed = linear_index(s, f, r, d);
        if (mask.data[size_t(seed)] == 0 || out.labels.data[size_t(seed)] != 0)
          continue;
        ++next_id;
        SourceRecord rec;
        rec.id = next_id;
        rec.bbox_min = rec.bbox_max = {f, r, d};
        rec.n_voxels = 0;
        rec.peak = intensity ? -std::numeric_limits<float>::infinity() : 0.0f;
        stack.clear();
        stack.push_back(seed);
        out.labels.data[size_t(seed)] = next_id;
        while (!stack.empty()) {
          const int64_t cur = stack.back();
          stack.pop_back();
          const int64_t cf = cur / (s.r * s.d);
          const int64_t cr = (cur / s.d) % s.r;
          const int64_t cd = cur % s.d;
          ++rec.n_voxels;
          rec.bbox_min.f = std::min(rec.bbox_min.f, cf);
          rec.bbox_min.r = std::min(rec.bbox_min.r, cr);
          rec.bbox_min.d = std::min(rec.bbox_min.d, cd);
          rec.bbox_max.f = std::max(rec.bbox_max.f, cf);
          rec.bbox_max.r = std::max(rec.bbox_max.r, cr);
          rec.bbox_max.d = std::max(rec.bbox_max.d, cd);
          if (intensity) {
            const float v = intensity->data[size_t(cur)];
            rec.peak = std::max(rec.peak, v);
            rec.flux_sum += v;
          }
          for (const Vox3& nb : nbs) {
            const int64_t nf = cf + nb.f, nr = cr + nb.r, nd = cd + nb.d;
            if (nf < 0 || nf >= s.f || nr < 0 || nr >= s.r || nd < 0 ||
                nd >= s.d)
              continue;
            const int64_t ni = linear_index(s, nf, nr, nd);
            if (mask.data[size_t(ni)] == 0 ||
                out.labels.data[size_t(ni)] != 0)
              continue;
            out.labels.data[size_t(ni)] = next_id;
            stack.push_back(ni);
          }
        }
        if (!intensity) rec.peak = 0.0f;
        out.records.push_back(rec);
      }
  return out;
}

void size_filter(Components& comps, int64_t min_voxels) {
  std::vector<int32_t> remap(comps.records.size() + 1, 0);
  std::vector<SourceRecord> kept;
  int32_t next_id = 0;
  for (const auto& rec : comps.records) {
    if (rec.n_voxels < min_voxels) continue;
    ++next_id;
    remap[size_t(rec.id)] = next_id;
    SourceRecord r = rec;
    r.id = next_id;
    kept.push_back(r);
  }
  for (auto& v : comps.labels.data) v = v > 0 ? remap[size_t(v)] : 0;
  comps.records = std::move(kept);
}

SpectralCube boxcar_smooth(const SpectralCube& cube, int axis, int width) {
  if (width <= 1) return cube;
  SpectralCube out = cube;
  const Vox3 s = cube.shape;
  const int64_t half_lo = (width - 1) / 2;
  const int64_t half_hi = width / 2;
  const int64_t axis_len = s[axis];

  // Iterate over lines along `axis`; prefix sums give O(1) window means.
  std::vector<double> prefix(size_t(axis_len) + 1, 0.0);
  Vox3 step{0, 0, 0};
  step[axis] = 1;
  const int64_t stride = linear_index(s, step.f, step.r, step.d);

  Vox3 outer = s;
  outer[axis] = 1;
  for (int64_t f = 0; f < outer.f; ++f)
    for (int64_t r = 0; r < outer.r; ++r)
      for (int64_t d = 0; d < outer.d; ++d) {
        const int64_t base = linear_index(s, f, r, d);
        for (int64_t i = 0; i < axis_len; ++i)
          prefix[size_t(i) + 1] =
              prefix[size_t(i)] + cube.data[size_t(base + i * stride)];
        for (int64_t i = 0; i < axis_len; ++i) {
          const int64_t lo = std::max<int64_t>(0, i - half_lo);
          const int64_t hi = std::min<int64_t>(axis_len - 1, i + half_hi);
          out.data[size_t(base + i * stride)] =
              float((prefix[size_t(hi) + 1] - prefix[size_t(lo)]) /
                    double(hi - lo + 1));
        }
      }
  return out;
}

double robust_sigma(const std::vector<float>& values) {
  if (values.empty()) return 0.0;
  std::vector<float> tmp = values;
  const size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
  const double med = tmp[mid];
  for (float& v : tmp) v = float(std::abs(v - med));
  std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
  return 1.4826 * double(tmp[mid]);
}

namespace {

double median_of(const std::vector<float>& values) {
  std::vector<float> tmp = values;
  const size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
  return tmp[mid];
}

void apply_size_limits(Components& comps, const BaselineConfig& cfg) {
  std::vector<int32_t> remap(comps.records.size() + 1, 0);
  std::vector<SourceRecord> kept;
  int32_t next_id = 0;
  for (const auto& rec : comps.records) {
    const int64_t xy = std::max(rec.bbox_max.r - rec.bbox_min.r + 1,
                                rec.bbox_max.d - rec.bbox_min.d + 1);
    const int64_t z = rec.bbox_max.f - rec.bbox_min.f + 1;
    if (xy < cfg.min_pixels || z < cfg.min_pixels || xy > cfg.max_xy_extent)
      continue;
    ++next_id;
    remap[size_t(rec.id)] = next_id;
    SourceRecord r = rec;
    r.id = next_id;
    kept.push_back(r);
  }
  for (auto& v : comps.labels.data) v = v > 0 ? remap[size_t(v)] : 0;
  comps.records = std::move(kept);
}

LabelVolume clip_mask(const SpectralCube& smoothed, double threshold_sigma) {
  const double med = median_of(smoothed.data);
  const double sigma = robust_sigma(smoothed.data);
  const double thr = med + threshold_sigma * sigma;
  LabelVolume mask(smoothed.shape);
  for (size_t i = 0; i < smoothed.data.size(); ++i)
    mask.data[i] = smoothed.data[i] > thr ? 1 : 0;
  return mask;
}

}  // namespace

Components baseline_smooth_clip(const SpectralCube& cube,
                                const BaselineConfig& config) {
  if (config.kernels_xy.empty() || config.kernels_z.empty())
    fail_usage("baseline kernel lists must be non-empty");
  if (config.threshold_sigma <= 0.0)
    fail_usage("baseline threshold must be > 0");

  LabelVolume unioned(cube.shape);
  for (int kxy : config.kernels_xy) {
    SpectralCube sm_xy = boxcar_smooth(cube, 1, kxy);
    sm_xy = boxcar_smooth(sm_xy, 2, kxy);
    for (int kz : config.kernels_z) {
      SpectralCube sm = boxcar_smooth(sm_xy, 0, kz);
      LabelVolume mask = clip_mask(sm, config.threshold_sigma);
      if (config.union_before_linking) {
        for (size_t i = 0; i < mask.data.size(); ++i)
          if (mask.data[i]) unioned.data[i] = 1;
      } else {
        Components comps = connected_components(mask, 26, &cube);
        apply_size_limits(comps, config);
        for (size_t i = 0; i < comps.labels.data.size(); ++i)
          if (comps.labels.data[i]) unioned.data[i] = 1;
      }
    }
  }
  Components out = connected_components(unioned, 26, &cube);
  if (config.union_before_linking) apply_size_limits(out, config);
  return out;
}

PadResult pad_for_model(const SpectralCube& cube, Vox3 min_shape,
                        int64_t multiple) {
  Vox3 target;
  for (int a = 0; a < 3; ++a) {
    int64_t t = std::max(cube.shape[a], min_shape[a]);
    if (multiple > 1) t = (t + multiple - 1) / multiple * multiple;
    target[a] = t;
  }
  PadResult out;
  out.valid = cube.shape;
  if (target == cube.shape) {
    out.padded = cube;
    return out;
  }
  out.padded = SpectralCube(target);
  out.padded.freq_res = cube.freq_res;
  out.padded.spatial_res = cube.spatial_res;
  out.padded.origin = cube.origin;
  for (int64_t f = 0; f < cube.shape.f; ++f)
    for (int64_t r = 0; r < cube.shape.r; ++r)
      std::memcpy(&out.padded.data[size_t(out.padded.idx(f, r, 0))],
                  &cube.data[size_t(cube.idx(f, r, 0))],
                  size_t(cube.shape.d) * sizeof(float));
  return out;
}

}  // namespace hifind::detect

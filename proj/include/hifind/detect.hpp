#pragma once

#include <functional>
#include <span>
#include <vector>

#include "hifind/cube.hpp"
#include "hifind/preproc.hpp"

namespace hifind::detect {

// Per-voxel probability with the number of sliding-window patches that
// contributed to it. After a full pass every voxel has coverage >= 1.
struct ProbabilityCube {
  Vox3 shape;
  std::vector<float> values;
  std::vector<int32_t> coverage;
};

// Accumulates patch predictions into sum/count volumes; finalize divides.
// Accumulation order is fixed by the caller, which makes the result
// bit-reproducible for a fixed patch order and equal to within rounding for
// any other order.
class OverlapAccumulator {
 public:
  explicit OverlapAccumulator(Vox3 cube_shape);
  // prob spans the full patch block; only the valid (non-padded) region
  // accumulates.
  void add(const preproc::Patch& patch, std::span<const float> prob);
  ProbabilityCube finalize() const;

 private:
  Vox3 shape_;
  std::vector<double> sum_;
  std::vector<int32_t> count_;
};

// A model adapter: fills `prob_out` (patch-shaped) from a patch whose data
// is already preprocessed (clip-normalized, rebinned grid if applicable).
using PatchModel =
    std::function<void(const preproc::Patch&, std::span<float> prob_out)>;

ProbabilityCube sliding_window_infer(const SpectralCube& cube,
                                     Vox3 patch_shape, Vox3 stride,
                                     const PatchModel& model);

// Threshold is strict: a voxel is foreground iff prob > threshold.
LabelVolume binarize(const ProbabilityCube& prob, double threshold = 0.5);

struct Components {
  LabelVolume labels;  // 0 background, 1..K component ids in scan order
  std::vector<SourceRecord> records;
};

// Flood-fill labeling; connectivity is 6 (faces) or 26 (faces+edges+corners).
// peak/flux_sum come from `intensity` when given, otherwise stay 0.
Components connected_components(const LabelVolume& mask, int connectivity = 26,
                                const SpectralCube* intensity = nullptr);

// Removes components with n_voxels < min_voxels ("smaller than" is strict,
// so a component of exactly min_voxels survives). Surviving components are
// renumbered 1..K' in their original order.
void size_filter(Components& comps, int64_t min_voxels = 300);

// SoFiA-style smooth-and-clip configuration (survey defaults).
struct BaselineConfig {
  double threshold_sigma = 5.0;
  std::vector<int> kernels_xy{0, 3, 6};
  std::vector<int> kernels_z{0, 3, 7, 15};
  int64_t min_pixels = 5;      // bbox size floor, per XY and Z
  int64_t max_xy_extent = 50;  // bbox size cap in XY; Z unlimited
  bool union_before_linking = true;
};

// For every (kxy, kz) kernel pair: boxcar-smooth, estimate sigma robustly
// (MAD * 1.4826 about the median), mark voxels above median + 5 sigma.
// Masks are unioned across kernel pairs before component linking (or per
// pair when union_before_linking is false), then size limits apply.
// Detects positive excursions only. Operates on raw (not clip-normalized)
// intensities.
Components baseline_smooth_clip(const SpectralCube& cube,
                                const BaselineConfig& config);

// Boxcar moving average of width w along one axis (0 = frequency, 1 = R.A.,
// 2 = Dec.), edge-truncated. Width 0 or 1 leaves the cube unchanged.
SpectralCube boxcar_smooth(const SpectralCube& cube, int axis, int width);

// Robust noise sigma: 1.4826 * median(|v - median(v)|).
double robust_sigma(const std::vector<float>& values);

struct PadResult {
  SpectralCube padded;
  Vox3 valid;  // original extents, for cropping back
};

// Zero-pads each axis up to the next multiple of `multiple` and to at least
// `min_shape` (use {0,0,0} for no minimum).
PadResult pad_for_model(const SpectralCube& cube, Vox3 min_shape = {0, 0, 0},
                        int64_t multiple = 8);

}  // namespace hifind::detect

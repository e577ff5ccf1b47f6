#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "hifind/cube.hpp"
#include "hifind/rng.hpp"

namespace hifind::preproc {

// Intensity clip window and the affine map onto [0,1].
inline constexpr double kClipLo = -15.0;
inline constexpr double kClipHi = 35.0;

inline float clip_normalize_value(float x) {
  double v = x;
  if (v < kClipLo) v = kClipLo;
  if (v > kClipHi) v = kClipHi;
  return float((v - kClipLo) / (kClipHi - kClipLo));
}

void clip_normalize(std::vector<float>& values);
SpectralCube clip_normalize(const SpectralCube& cube);

// Frequency rebin: overlapping average pooling with kernel 6, stride 4.
// Output length is floor((n_freq - 6)/4) + 1; the trailing remainder is
// discarded. Masks rebin with an any-hit max over the same windows.
inline constexpr int64_t kRebinKernel = 6;
inline constexpr int64_t kRebinStride = 4;

inline int64_t rebin_length(int64_t n_freq) {
  return (n_freq - kRebinKernel) / kRebinStride + 1;
}

SpectralCube rebin_freq(const SpectralCube& cube);
LabelVolume rebin_mask(const LabelVolume& mask);

// A cropped (and possibly zero-padded) training/inference block.
struct Patch {
  Vox3 shape;         // block shape (padded)
  Vox3 offset;        // location of the block in its source cube
  Vox3 valid_extent;  // per-axis count of non-padded voxels
  std::vector<float> data;
  std::vector<uint8_t> label;

  int64_t idx(int64_t f, int64_t r, int64_t d) const {
    return linear_index(shape, f, r, d);
  }
};

struct AugmentConfig {
  double flip_prob = 0.5;
  double noise_mu = 0.0;
  std::pair<double, double> noise_sigma{2.8, 3.8};
  std::pair<double, double> cutmix_intensity{0.30, 0.80};
  double cutmix_prob = 0.5;
};

// Sliding-window offsets along each axis: 0, s, 2s, ... with the last
// window clamped to end exactly at the axis end. Axes shorter than the
// patch produce the single offset 0 (the patch is padded).
std::vector<Vox3> crop_offsets(Vox3 cube_shape, Vox3 patch_shape, Vox3 stride);

Patch extract_patch(const SpectralCube& cube, const LabelVolume* mask,
                    Vox3 offset, Vox3 patch_shape);

// Deterministic core of the flip augmentation; data and label move together.
void flip_patch(Patch& patch, const std::array<bool, 3>& axes);
std::array<bool, 3> random_flip(Patch& patch, Rng& rng, double flip_prob);

// Adds N(mu, sigma^2) noise to the data block, sigma drawn once per patch
// from the configured range. Returns the drawn sigma. Applied to raw
// (pre-clip) intensities.
double add_gaussian_noise(Patch& patch, Rng& rng,
                          std::pair<double, double> sigma_range,
                          double mu = 0.0);

// Degrades one labeled source toward the local background:
//   v' = m + alpha * (v - m),  alpha ~ U(intensity_range)
// where m is the median of unlabeled voxels around the component. The label
// is unchanged. No-op when the label block is empty. Returns drawn alpha
// (1.0 for the no-op case).
double cutmix_degrade(std::vector<float>& data,
                      const std::vector<int32_t>& label, Vox3 shape, Rng& rng,
                      std::pair<double, double> intensity_range);
double cutmix_degrade(SpectralCube& cube, const LabelVolume& mask, Rng& rng,
                      std::pair<double, double> intensity_range);
double cutmix_degrade(Patch& patch, Rng& rng,
                      std::pair<double, double> intensity_range);

struct SampleSet {
  std::vector<Patch> patches;
  bool no_sources = false;  // warning flag: all-negative sampling
};

// Balanced 1:1 positive/negative patch sampling. Positive patches contain
// at least half the voxels of some source; negatives are uniform within the
// cube. Labels always come from the ground truth.
SampleSet sample_training_patches(const SpectralCube& cube,
                                  const LabelVolume& mask, Rng& rng, int64_t n,
                                  Vox3 patch_shape);

}  // namespace hifind::preproc

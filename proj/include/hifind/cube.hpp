#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hifind/common.hpp"

namespace hifind {

// 3D intensity volume over (frequency, R.A., Dec.). Intensities are stored
// as float32 in C order with Dec. fastest, so a fixed-frequency plane is a
// contiguous (ra, dec) block.
struct SpectralCube {
  Vox3 shape;
  std::vector<float> data;
  double freq_res = 7.6;        // kHz / voxel
  double spatial_res = 0.0167;  // degrees / voxel
  std::array<double, 3> origin{0.0, 0.0, 0.0};  // (freq0 kHz, ra0, dec0 deg)

  SpectralCube() = default;
  explicit SpectralCube(Vox3 s) : shape(s), data(s.voxels(), 0.0f) {}

  int64_t voxels() const { return shape.voxels(); }
  int64_t idx(int64_t f, int64_t r, int64_t d) const {
    return linear_index(shape, f, r, d);
  }
  float& at(int64_t f, int64_t r, int64_t d) { return data[idx(f, r, d)]; }
  float at(int64_t f, int64_t r, int64_t d) const { return data[idx(f, r, d)]; }

  void validate() const {
    if (shape.f < 1 || shape.r < 1 || shape.d < 1)
      fail_data("cube shape components must all be >= 1, got " +
                to_string(shape));
    if (static_cast<int64_t>(data.size()) != shape.voxels())
      fail_data("cube data length does not match shape");
    for (float v : data)
      if (!std::isfinite(v)) fail_data("cube contains non-finite intensity");
  }

  bool operator==(const SpectralCube&) const = default;
};

// Voxel mask over the same grid as a cube: binary {0,1} ground truth or
// prediction, or non-negative component labels after connected-component
// labeling. Labels are kept as int32 in memory; the on-disk container is
// 8-bit and accepts binary masks only.
struct LabelVolume {
  Vox3 shape;
  std::vector<int32_t> data;

  LabelVolume() = default;
  explicit LabelVolume(Vox3 s) : shape(s), data(s.voxels(), 0) {}

  int64_t voxels() const { return shape.voxels(); }
  int64_t idx(int64_t f, int64_t r, int64_t d) const {
    return linear_index(shape, f, r, d);
  }
  int32_t& at(int64_t f, int64_t r, int64_t d) { return data[idx(f, r, d)]; }
  int32_t at(int64_t f, int64_t r, int64_t d) const {
    return data[idx(f, r, d)];
  }

  bool is_binary() const {
    for (int32_t v : data)
      if (v != 0 && v != 1) return false;
    return true;
  }

  int64_t foreground_count() const {
    int64_t n = 0;
    for (int32_t v : data) n += v != 0;
    return n;
  }

  bool operator==(const LabelVolume&) const = default;
};

// One connected component: catalog row analog of the survey catalogs'
// per-source coordinate and frequency ranges. Bounding box is inclusive.
struct SourceRecord {
  int64_t id = 0;
  Vox3 bbox_min;
  Vox3 bbox_max;
  int64_t n_voxels = 0;
  float peak = 0.0f;      // max intensity within the component mask
  double flux_sum = 0.0;  // sum of intensities within the component mask

  bool operator==(const SourceRecord&) const = default;
};

}  // namespace hifind

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hifind/cube.hpp"
#include "hifind/png_writer.hpp"

namespace hifind::render {

enum class SliceAxis { freq = 0, ra = 1, dec = 2 };

SliceAxis parse_axis(const std::string& name);

// One rendered slice: grayscale intensity over the fixed clip window
// [-15,35] plus contour overlays (ground truth green, prediction red,
// both yellow). The contour pixel counts support quick sanity checks.
struct SliceImage {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> gray;  // width*height
  std::vector<uint8_t> rgb;   // width*height*3, gray + overlays
  bool has_overlay = false;
  int64_t gt_contour_pixels = 0;
  int64_t pred_contour_pixels = 0;
};

// `index` runs along `axis`; out-of-range indices are an error. Masks must
// match the cube grid when given.
SliceImage render_slice(const SpectralCube& cube, const LabelVolume* gt_mask,
                        const LabelVolume* pred_mask, SliceAxis axis,
                        int64_t index);

// Writes grayscale when the image has no overlays, RGB otherwise.
void write_slice_png(const SliceImage& image, const std::string& path,
                     const std::vector<PngText>& texts = {});

}  // namespace hifind::render

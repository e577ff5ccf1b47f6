#include "hifind/render.hpp"

#include <cmath>

#include "hifind/preproc.hpp"

namespace hifind::render {

SliceAxis parse_axis(const std::string& name) {
  if (name == "freq") return SliceAxis::freq;
  if (name == "ra") return SliceAxis::ra;
  if (name == "dec") return SliceAxis::dec;
  fail_usage("slice axis must be freq, ra or dec, got '" + name + "'");
}

namespace {

// Image plane for a slice along `axis`: (rows, cols) are the remaining two
// axes in (freq, ra, dec) order.
void plane_axes(SliceAxis axis, int& row_axis, int& col_axis) {
  switch (axis) {
    case SliceAxis::freq:
      row_axis = 1;
      col_axis = 2;
      return;
    case SliceAxis::ra:
      row_axis = 0;
      col_axis = 2;
      return;
    case SliceAxis::dec:
      row_axis = 0;
      col_axis = 1;
      return;
  }
  fail_internal("bad axis");
}

struct MaskSlice {
  std::vector<uint8_t> on;  // width*height
};

MaskSlice slice_mask(const LabelVolume& mask, SliceAxis axis, int64_t index,
                     int64_t height, int64_t width, int row_axis,
                     int col_axis) {
  MaskSlice out;
  out.on.assign(size_t(width * height), 0);
  Vox3 pos;
  pos[int(axis)] = index;
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x) {
      pos[row_axis] = y;
      pos[col_axis] = x;
      out.on[size_t(y * width + x)] = mask.at(pos.f, pos.r, pos.d) != 0;
    }
  return out;
}

// Boundary pixels: on-pixels with an off (or out-of-image) 4-neighbor.
std::vector<uint8_t> contour_of(const MaskSlice& m, int64_t height,
                                int64_t width) {
  std::vector<uint8_t> out(m.on.size(), 0);
  for (int64_t y = 0; y < height; ++y)
    for (int64_t x = 0; x < width; ++x) {
      if (!m.on[size_t(y * width + x)]) continue;
      const bool edge =
          y == 0 || y == height - 1 || x == 0 || x == width - 1 ||
          !m.on[size_t((y - 1) * width + x)] ||
          !m.on[size_t((y + 1) * width + x)] ||
          !m.on[size_t(y * width + (x - 1))] ||
          !m.on[size_t(y * width + (x + 1))];
      if (edge) out[size_t(y * width + x)] = 1;
    }
  return out;
}

}  // namespace

SliceImage render_slice(const SpectralCube& cube, const LabelVolume* gt_mask,
                        const LabelVolume* pred_mask, SliceAxis axis,
                        int64_t index) {
  if (index < 0 || index >= cube.shape[int(axis)])
    fail_usage("slice index " + std::to_string(index) +
               " out of range for axis length " +
               std::to_string(cube.shape[int(axis)]));
  if (gt_mask && gt_mask->shape != cube.shape)
    fail_data("ground-truth mask grid does not match cube");
  if (pred_mask && pred_mask->shape != cube.shape)
    fail_data("prediction mask grid does not match cube");

  int row_axis = 0, col_axis = 0;
  plane_axes(axis, row_axis, col_axis);

  SliceImage img;
  img.height = cube.shape[row_axis];
  img.width = cube.shape[col_axis];
  img.gray.assign(size_t(img.width * img.height), 0);

  Vox3 pos;
  pos[int(axis)] = index;
  for (int64_t y = 0; y < img.height; ++y)
    for (int64_t x = 0; x < img.width; ++x) {
      pos[row_axis] = y;
      pos[col_axis] = x;
      const float t = preproc::clip_normalize_value(cube.at(pos.f, pos.r,
                                                            pos.d));
      img.gray[size_t(y * img.width + x)] =
          uint8_t(std::lround(double(t) * 255.0));
    }

  img.rgb.resize(img.gray.size() * 3);
  for (size_t i = 0; i < img.gray.size(); ++i)
    img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = img.gray[i];

  img.has_overlay = gt_mask != nullptr || pred_mask != nullptr;
  std::vector<uint8_t> gt_contour, pred_contour;
  if (gt_mask) {
    auto ms = slice_mask(*gt_mask, axis, index, img.height, img.width,
                         row_axis, col_axis);
    gt_contour = contour_of(ms, img.height, img.width);
  }
  if (pred_mask) {
    auto ms = slice_mask(*pred_mask, axis, index, img.height, img.width,
                         row_axis, col_axis);
    pred_contour = contour_of(ms, img.height, img.width);
  }
  for (size_t i = 0; i < img.gray.size(); ++i) {
    const bool g = !gt_contour.empty() && gt_contour[i];
    const bool p = !pred_contour.empty() && pred_contour[i];
    if (!g && !p) continue;
    img.rgb[3 * i] = p ? 255 : 0;
    img.rgb[3 * i + 1] = g ? 255 : 0;
    img.rgb[3 * i + 2] = 0;
    img.gt_contour_pixels += g;
    img.pred_contour_pixels += p;
  }
  return img;
}

void write_slice_png(const SliceImage& image, const std::string& path,
                     const std::vector<PngText>& texts) {
  if (image.has_overlay)
    write_png_rgb8(path, image.width, image.height, image.rgb, texts);
  else
    write_png_gray8(path, image.width, image.height, image.gray, texts);
}

}  // namespace hifind::render

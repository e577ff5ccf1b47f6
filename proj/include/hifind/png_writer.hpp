#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hifind::render {

using PngText = std::pair<std::string, std::string>;  // tEXt key/value

// Minimal deterministic PNG encoders (zlib deflate, filter 0 scanlines).
// Pixels are row-major, top row first; rgb is interleaved.
void write_png_gray8(const std::string& path, int64_t width, int64_t height,
                     const std::vector<uint8_t>& pixels,
                     const std::vector<PngText>& texts = {});
void write_png_rgb8(const std::string& path, int64_t width, int64_t height,
                    const std::vector<uint8_t>& pixels,
                    const std::vector<PngText>& texts = {});

}  // namespace hifind::render

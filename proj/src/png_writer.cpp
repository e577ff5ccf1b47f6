#include "hifind/png_writer.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "hifind/common.hpp"

namespace hifind::render {

namespace {

void put_u32be(std::string& b, uint32_t v) {
  b.push_back(char((v >> 24) & 0xff));
  b.push_back(char((v >> 16) & 0xff));
  b.push_back(char((v >> 8) & 0xff));
  b.push_back(char(v & 0xff));
}

void write_chunk(std::string& out, const char type[4],
                 const std::string& payload) {
  put_u32be(out, uint32_t(payload.size()));
  const size_t crc_start = out.size();
  out.append(type, 4);
  out += payload;
  const uint32_t crc =
      uint32_t(crc32(0, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                     uInt(out.size() - crc_start)));
  put_u32be(out, crc);
}

void write_png(const std::string& path, int64_t width, int64_t height,
               int channels, const std::vector<uint8_t>& pixels,
               const std::vector<PngText>& texts) {
  if (width < 1 || height < 1)
    fail_internal("png dimensions must be positive");
  if (int64_t(pixels.size()) != width * height * channels)
    fail_internal("pixel buffer size mismatch");

  // Filter byte 0 in front of every scanline.
  std::vector<uint8_t> raw(size_t(height * (width * channels + 1)));
  for (int64_t y = 0; y < height; ++y) {
    uint8_t* row = raw.data() + size_t(y * (width * channels + 1));
    row[0] = 0;
    std::memcpy(row + 1, pixels.data() + size_t(y * width * channels),
                size_t(width * channels));
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 9) !=
      Z_OK)
    fail_internal("png deflate failed");
  compressed.resize(bound);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, uint32_t(width));
  put_u32be(ihdr, uint32_t(height));
  ihdr.push_back(8);                            // bit depth
  ihdr.push_back(channels == 1 ? 0 : char(2));  // gray / rgb
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);
  for (const auto& [key, value] : texts) {
    std::string payload = key;
    payload.push_back('\0');
    payload += value;
    write_chunk(out, "tEXt", payload);
  }
  write_chunk(out, "IDAT",
              std::string(reinterpret_cast<const char*>(compressed.data()),
                          compressed.size()));
  write_chunk(out, "IEND", "");

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail_data("cannot open for writing: " + path);
  f.write(out.data(), std::streamsize(out.size()));
  f.flush();
  if (!f) fail_data("write failed: " + path);
}

}  // namespace

void write_png_gray8(const std::string& path, int64_t width, int64_t height,
                     const std::vector<uint8_t>& pixels,
                     const std::vector<PngText>& texts) {
  write_png(path, width, height, 1, pixels, texts);
}

void write_png_rgb8(const std::string& path, int64_t width, int64_t height,
                    const std::vector<uint8_t>& pixels,
                    const std::vector<PngText>& texts) {
  write_png(path, width, height, 3, pixels, texts);
}

}  // namespace hifind::render

#pragma once

#include <string>
#include <vector>

#include "hifind/cube.hpp"

namespace hifind::io {

// HICUBE binary container, all little-endian:
//   magic "HICB" | version u32=1 | dtype u8 (0=f32, 1=u8) | 3 reserved bytes
//   | n_freq u64 | n_ra u64 | n_dec u64 | freq_res f64 | spatial_res f64
//   | origin 3xf64 | payload (C order, frequency slowest / Dec. fastest)
// Header is 76 bytes; the file size must equal header + payload exactly.
inline constexpr size_t kHicubeHeaderSize = 76;
inline constexpr uint32_t kHicubeVersion = 1;

SpectralCube read_cube(const std::string& path);
void write_cube(const SpectralCube& cube, const std::string& path);

// Masks reuse the container with an 8-bit payload. Binary mode (the
// default) accepts only values {0,1} on write.
LabelVolume read_mask(const std::string& path);
void write_mask(const LabelVolume& volume, const std::string& path,
                bool binary = true);

// Catalog CSV with fixed column order:
//   id,freq_min,freq_max,ra_min,ra_max,dec_min,dec_max,n_voxels,peak,flux_sum
// Optional '#'-prefixed header comments precede the column header; readers
// skip and return them.
void write_catalog(const std::vector<SourceRecord>& records,
                   const std::string& path,
                   const std::vector<std::string>& header_comments = {});

struct CatalogFile {
  std::vector<SourceRecord> records;
  std::vector<std::string> header_comments;  // without the leading "# "
};
CatalogFile read_catalog(const std::string& path);

}  // namespace hifind::io

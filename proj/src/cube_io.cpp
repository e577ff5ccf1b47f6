#include "hifind/cube_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace hifind::io {

namespace {

constexpr char kMagic[4] = {'H', 'I', 'C', 'B'};
constexpr uint8_t kDtypeF32 = 0;
constexpr uint8_t kDtypeU8 = 1;
constexpr int64_t kMaxVoxels = int64_t(1) << 34;  // 16 Gvoxel sanity cap

void put_u32(std::string& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& b, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(b, bits);
}

uint32_t get_u32(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
double get_f64(const unsigned char* p) {
  uint64_t bits = get_u64(p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

struct Header {
  uint8_t dtype = 0;
  Vox3 shape;
  double freq_res = 0.0;
  double spatial_res = 0.0;
  std::array<double, 3> origin{};
};

std::string encode_header(const Header& h) {
  std::string b;
  b.reserve(kHicubeHeaderSize);
  b.append(kMagic, 4);
  put_u32(b, kHicubeVersion);
  b.push_back(char(h.dtype));
  b.append(3, '\0');
  put_u64(b, uint64_t(h.shape.f));
  put_u64(b, uint64_t(h.shape.r));
  put_u64(b, uint64_t(h.shape.d));
  put_f64(b, h.freq_res);
  put_f64(b, h.spatial_res);
  for (double o : h.origin) put_f64(b, o);
  return b;
}

// Reads and validates everything up to the payload. `expect_dtype` guards
// against loading a mask file as a cube and vice versa.
Header read_header(std::ifstream& f, const std::string& path,
                   uint8_t expect_dtype) {
  unsigned char buf[kHicubeHeaderSize];
  f.read(reinterpret_cast<char*>(buf), sizeof buf);
  if (f.gcount() != std::streamsize(sizeof buf))
    fail_data(path + ": file too short for HICUBE header");
  if (std::memcmp(buf, kMagic, 4) != 0)
    fail_data(path + ": bad magic, not a HICUBE file");
  uint32_t version = get_u32(buf + 4);
  if (version != kHicubeVersion)
    fail_data(path + ": unsupported HICUBE version " + std::to_string(version));
  Header h;
  h.dtype = buf[8];
  if (h.dtype != kDtypeF32 && h.dtype != kDtypeU8)
    fail_data(path + ": unknown dtype " + std::to_string(h.dtype));
  if (h.dtype != expect_dtype)
    fail_data(path + ": dtype mismatch (cube/mask confusion)");
  h.shape.f = int64_t(get_u64(buf + 12));
  h.shape.r = int64_t(get_u64(buf + 20));
  h.shape.d = int64_t(get_u64(buf + 28));
  if (h.shape.f < 1 || h.shape.r < 1 || h.shape.d < 1 ||
      h.shape.f > kMaxVoxels || h.shape.r > kMaxVoxels ||
      h.shape.d > kMaxVoxels || h.shape.voxels() > kMaxVoxels)
    fail_data(path + ": implausible shape " + to_string(h.shape));
  h.freq_res = get_f64(buf + 36);
  h.spatial_res = get_f64(buf + 44);
  for (int i = 0; i < 3; ++i) h.origin[i] = get_f64(buf + 52 + 8 * i);
  return h;
}

void check_payload_size(std::ifstream& f, const std::string& path,
                        int64_t expected_bytes) {
  f.seekg(0, std::ios::end);
  int64_t size = int64_t(f.tellg());
  if (size != int64_t(kHicubeHeaderSize) + expected_bytes)
    fail_data(path + ": payload size mismatch (corrupt or truncated file)");
  f.seekg(kHicubeHeaderSize, std::ios::beg);
}

void write_file(const std::string& path, const std::string& header,
                const char* payload, size_t payload_bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail_data("cannot open for writing: " + path);
  f.write(header.data(), std::streamsize(header.size()));
  f.write(payload, std::streamsize(payload_bytes));
  f.flush();
  if (!f) fail_data("write failed: " + path);
}

}  // namespace

SpectralCube read_cube(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_data("cannot open: " + path);
  Header h = read_header(f, path, kDtypeF32);
  check_payload_size(f, path, h.shape.voxels() * 4);

  SpectralCube cube(h.shape);
  cube.freq_res = h.freq_res;
  cube.spatial_res = h.spatial_res;
  cube.origin = h.origin;
  f.read(reinterpret_cast<char*>(cube.data.data()),
         std::streamsize(cube.data.size() * 4));
  if (!f) fail_data(path + ": payload read failed");
  for (float v : cube.data)
    if (!std::isfinite(v)) fail_data(path + ": non-finite intensity in payload");
  return cube;
}

void write_cube(const SpectralCube& cube, const std::string& path) {
  cube.validate();
  Header h{kDtypeF32, cube.shape, cube.freq_res, cube.spatial_res, cube.origin};
  write_file(path, encode_header(h),
             reinterpret_cast<const char*>(cube.data.data()),
             cube.data.size() * 4);
}

LabelVolume read_mask(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_data("cannot open: " + path);
  Header h = read_header(f, path, kDtypeU8);
  check_payload_size(f, path, h.shape.voxels());

  std::vector<uint8_t> raw(size_t(h.shape.voxels()));
  f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
  if (!f) fail_data(path + ": payload read failed");
  LabelVolume vol(h.shape);
  for (size_t i = 0; i < raw.size(); ++i) vol.data[i] = raw[i];
  return vol;
}

void write_mask(const LabelVolume& volume, const std::string& path,
                bool binary) {
  if (volume.shape.f < 1 || volume.shape.r < 1 || volume.shape.d < 1)
    fail_data("mask shape components must all be >= 1");
  if (int64_t(volume.data.size()) != volume.voxels())
    fail_data("mask data length does not match shape");
  std::vector<uint8_t> raw(volume.data.size());
  for (size_t i = 0; i < volume.data.size(); ++i) {
    int32_t v = volume.data[i];
    if (binary && v != 0 && v != 1)
      fail_data("binary mask contains value " + std::to_string(v));
    if (v < 0 || v > 255)
      fail_data("mask value " + std::to_string(v) + " out of 8-bit range");
    raw[i] = uint8_t(v);
  }
  // Mask metadata: resolutions are unused, write the defaults.
  Header h;
  h.dtype = kDtypeU8;
  h.shape = volume.shape;
  h.freq_res = 7.6;
  h.spatial_res = 0.0167;
  write_file(path, encode_header(h), reinterpret_cast<const char*>(raw.data()),
             raw.size());
}

void write_catalog(const std::vector<SourceRecord>& records,
                   const std::string& path,
                   const std::vector<std::string>& header_comments) {
  std::set<int64_t> ids;
  for (const auto& rec : records)
    if (!ids.insert(rec.id).second)
      fail_data("duplicate catalog id " + std::to_string(rec.id));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail_data("cannot open for writing: " + path);
  for (const auto& c : header_comments) f << "# " << c << "\n";
  f << "id,freq_min,freq_max,ra_min,ra_max,dec_min,dec_max,n_voxels,peak,"
       "flux_sum\n";
  char buf[256];
  for (const auto& rec : records) {
    std::snprintf(buf, sizeof buf,
                  "%lld,%lld,%lld,%lld,%lld,%lld,%lld,%lld,%.9g,%.17g\n",
                  (long long)rec.id, (long long)rec.bbox_min.f,
                  (long long)rec.bbox_max.f, (long long)rec.bbox_min.r,
                  (long long)rec.bbox_max.r, (long long)rec.bbox_min.d,
                  (long long)rec.bbox_max.d, (long long)rec.n_voxels,
                  double(rec.peak), rec.flux_sum);
    f << buf;
  }
  f.flush();
  if (!f) fail_data("write failed: " + path);
}

CatalogFile read_catalog(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_data("cannot open: " + path);
  CatalogFile out;
  std::string line;
  bool header_seen = false;
  std::set<int64_t> ids;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      size_t start = line.size() > 1 && line[1] == ' ' ? 2 : 1;
      out.header_comments.push_back(line.substr(start));
      continue;
    }
    if (!header_seen) {
      if (line.find("id,freq_min") != 0)
        fail_data(path + ": unexpected catalog header: " + line);
      header_seen = true;
      continue;
    }
    SourceRecord rec;
    long long id, f0, f1, r0, r1, d0, d1, nv;
    double peak, flux;
    if (std::sscanf(line.c_str(),
                    "%lld,%lld,%lld,%lld,%lld,%lld,%lld,%lld,%lf,%lf", &id,
                    &f0, &f1, &r0, &r1, &d0, &d1, &nv, &peak, &flux) != 10)
      fail_data(path + ": malformed catalog row: " + line);
    rec.id = id;
    rec.bbox_min = {f0, r0, d0};
    rec.bbox_max = {f1, r1, d1};
    rec.n_voxels = nv;
    rec.peak = float(peak);
    rec.flux_sum = flux;
    if (!ids.insert(rec.id).second)
      fail_data(path + ": duplicate catalog id " + std::to_string(rec.id));
    out.records.push_back(rec);
  }
  if (!header_seen) fail_data(path + ": missing catalog header");
  return out;
}

}  // namespace hifind::io

#include "hifind/nn/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace hifind::nn {

namespace {

constexpr char kMagic[4] = {'H', 'I', 'W', 'T'};

void put_u32(std::ofstream& f, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  f.write(b, 4);
}
void put_u64(std::ofstream& f, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
  f.write(b, 8);
}
uint32_t get_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}
uint64_t get_u64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, Tensor::Ptr>>& params,
    const std::map<std::string, double>& meta) {
  std::vector<std::pair<std::string, Tensor::Ptr>> entries = params;
  for (const auto& [key, value] : meta) {
    auto t = Tensor::make({1});
    t->v[0] = float(value);
    entries.emplace_back("__meta." + key, t);
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t i = 1; i < entries.size(); ++i)
    if (entries[i].first == entries[i - 1].first)
      fail_data("duplicate checkpoint entry: " + entries[i].first);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail_data("cannot open for writing: " + path);
  f.write(kMagic, 4);
  put_u32(f, kCheckpointVersion);
  put_u64(f, entries.size());
  for (const auto& [name, t] : entries) {
    put_u32(f, uint32_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    put_u32(f, uint32_t(t->shape.size()));
    for (int64_t dim : t->shape) put_u64(f, uint64_t(dim));
    f.write(reinterpret_cast<const char*>(t->v.data()),
            std::streamsize(t->v.size() * 4));
  }
  f.flush();
  if (!f) fail_data("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_data("cannot open checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (f.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    fail_data(path + ": bad magic, not a HIWT checkpoint");
  const uint32_t version = get_u32(f);
  if (version != kCheckpointVersion)
    fail_data(path + ": unsupported checkpoint version " +
              std::to_string(version));
  const uint64_t n = get_u64(f);
  if (n > (1u << 24)) fail_data(path + ": implausible entry count");

  Checkpoint out;
  for (uint64_t e = 0; e < n; ++e) {
    const uint32_t name_len = get_u32(f);
    if (!f || name_len > 4096) fail_data(path + ": corrupt entry name");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const uint32_t ndims = get_u32(f);
    if (!f || ndims > 8) fail_data(path + ": corrupt entry dims");
    std::vector<int64_t> shape(ndims);
    int64_t numel = 1;
    for (uint32_t i = 0; i < ndims; ++i) {
      shape[i] = int64_t(get_u64(f));
      if (shape[i] < 1 || shape[i] > (int64_t(1) << 32))
        fail_data(path + ": corrupt entry shape");
      numel *= shape[i];
    }
    auto t = Tensor::make(shape);
    f.read(reinterpret_cast<char*>(t->v.data()),
           std::streamsize(size_t(numel) * 4));
    if (!f) fail_data(path + ": truncated checkpoint payload");
    if (name.rfind("__meta.", 0) == 0) {
      out.meta[name.substr(7)] = double(t->v[0]);
    } else {
      out.tensors[name] = t;
    }
  }
  return out;
}

}  // namespace hifind::nn

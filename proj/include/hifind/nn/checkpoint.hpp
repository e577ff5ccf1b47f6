#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hifind/nn/tensor.hpp"

namespace hifind::nn {

// HIWT checkpoint container, all little-endian:
//   magic "HIWT" | version u32=1 | n_entries u64 | entries...
// each entry: name_len u32 | name bytes | ndims u32 | dims u64[] | f32 data.
// Entries are ordered by name, so the file is deterministic. Scalar entries
// named "__meta.<key>" carry run metadata (rebin flag, patch shape, ...).
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, Tensor::Ptr>>& params,
    const std::map<std::string, double>& meta = {});

struct Checkpoint {
  std::map<std::string, Tensor::Ptr> tensors;  // without __meta entries
  std::map<std::string, double> meta;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace hifind::nn

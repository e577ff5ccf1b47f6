#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>

#include "hifind/common.hpp"

namespace hifind {

// Flat key=value run configuration. Lines starting with '#' are comments;
// later assignments win, so CLI overrides are applied by appending.
class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config from_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_str(const std::string& key) const;  // required
  std::string get_str(const std::string& key, const std::string& def) const;
  int64_t get_int(const std::string& key, int64_t def) const;
  double get_f64(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  Vox3 get_vox3(const std::string& key, Vox3 def) const;  // "f,r,d"
  std::pair<double, double> get_range(const std::string& key,
                                      std::pair<double, double> def) const;

  // Rejects keys outside `allowed`; typo guard for subcommand configs.
  void check_allowed(const std::set<std::string>& allowed) const;

  // Sorted key=value lines; the config hash is FNV-1a 64 over this.
  std::string canonical() const;
  uint64_t hash() const;
  std::string hash_hex() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

uint64_t fnv1a64(const std::string& bytes);

}  // namespace hifind

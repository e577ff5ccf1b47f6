#include "hifind/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hifind {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail_usage("config line " + std::to_string(lineno) +
                 " is not key=value: '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      fail_usage("config line " + std::to_string(lineno) + " has empty key");
    cfg.kv_[key] = value;
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail_usage("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) fail_usage("missing required config key: " + key);
  return it->second;
}

std::string Config::get_str(const std::string& key,
                            const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

int64_t Config::get_int(const std::string& key, int64_t def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    int64_t v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail_usage("config key '" + key + "' is not an integer: " + it->second);
  }
}

double Config::get_f64(const std::string& key, double def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    fail_usage("config key '" + key + "' is not a number: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  fail_usage("config key '" + key + "' is not a boolean: " + v);
}

Vox3 Config::get_vox3(const std::string& key, Vox3 def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  Vox3 out;
  if (std::sscanf(it->second.c_str(), "%ld,%ld,%ld", &out.f, &out.r, &out.d) !=
      3)
    fail_usage("config key '" + key + "' is not a voxel triple f,r,d: " +
               it->second);
  return out;
}

std::pair<double, double> Config::get_range(
    const std::string& key, std::pair<double, double> def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  double lo = 0.0, hi = 0.0;
  if (std::sscanf(it->second.c_str(), "%lf,%lf", &lo, &hi) != 2)
    fail_usage("config key '" + key + "' is not a range lo,hi: " + it->second);
  if (lo > hi)
    fail_usage("config key '" + key + "' range is not ordered: " + it->second);
  return {lo, hi};
}

void Config::check_allowed(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : kv_)
    if (!allowed.count(k)) fail_usage("unknown config key: " + k);
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : kv_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t Config::hash() const { return fnv1a64(canonical()); }

std::string Config::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace hifind

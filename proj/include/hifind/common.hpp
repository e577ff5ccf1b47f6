#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hifind {

// Error categories map 1:1 onto CLI exit codes (and C API status values):
// usage = 1, data = 2, internal = 3.
enum class ErrorKind { usage = 1, data = 2, internal = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) {
  throw Error(ErrorKind::usage, msg);
}
[[noreturn]] inline void fail_data(const std::string& msg) {
  throw Error(ErrorKind::data, msg);
}
[[noreturn]] inline void fail_internal(const std::string& msg) {
  throw Error(ErrorKind::internal, msg);
}

// Voxel triple in (frequency, R.A., Dec.) order. Used for shapes, offsets
// and extents alike. Linear index runs frequency-slowest, Dec.-fastest.
struct Vox3 {
  int64_t f = 0;
  int64_t r = 0;
  int64_t d = 0;

  int64_t voxels() const { return f * r * d; }
  int64_t& operator[](int axis) { return axis == 0 ? f : axis == 1 ? r : d; }
  int64_t operator[](int axis) const {
    return axis == 0 ? f : axis == 1 ? r : d;
  }
  bool operator==(const Vox3&) const = default;
};

inline int64_t linear_index(const Vox3& shape, int64_t f, int64_t r,
                            int64_t d) {
  return (f * shape.r + r) * shape.d + d;
}

inline std::string to_string(const Vox3& v) {
  return "(" + std::to_string(v.f) + "," + std::to_string(v.r) + "," +
         std::to_string(v.d) + ")";
}

}  // namespace hifind

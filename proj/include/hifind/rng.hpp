#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

namespace hifind {

// splitmix64 finalizer; used to derive independent per-stream seeds so that
// cubes, RFI placement and training can draw from unrelated sequences.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
  uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled distributions. The standard distribution
// objects are implementation-defined, so sampling goes through fixed
// formulas (scaled uniforms, Box-Muller) to keep output identical across
// standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // [0, 1)
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive on both ends
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (hi <= lo) return lo;
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(eng_() % span);
  }

  double normal(double mu = 0.0, double sigma = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mu + sigma * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(theta);
    has_spare_ = true;
    return mu + sigma * radius * std::cos(theta);
  }

  bool bernoulli(double p) { return uniform() < p; }

  void save(std::ostream& os) const {
    os << eng_ << ' ' << (has_spare_ ? 1 : 0);
    if (has_spare_) {
      os << ' ' << std::hexfloat << spare_ << std::defaultfloat;
    }
  }

  void load(std::istream& is) {
    is >> eng_;
    int spare = 0;
    is >> spare;
    has_spare_ = spare != 0;
    if (has_spare_) is >> spare_;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hifind

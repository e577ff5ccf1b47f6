#pragma once

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hifind/nn/tensor.hpp"

namespace hifind::nn {

// Exponential decay from lr_start to lr_end over `total` epochs:
//   lr(e) = lr_start * (lr_end/lr_start)^(e / (total-1))
// The final epoch returns lr_end exactly.
inline double lr_schedule(int64_t epoch, int64_t total = 600,
                          double lr_start = 0.01, double lr_end = 0.0005) {
  if (epoch < 0 || epoch >= total)
    fail_usage("lr_schedule epoch " + std::to_string(epoch) +
               " out of range [0, " + std::to_string(total) + ")");
  if (total == 1) return lr_start;
  if (epoch == 0) return lr_start;
  if (epoch == total - 1) return lr_end;
  const double t = double(epoch) / double(total - 1);
  return lr_start * std::pow(lr_end / lr_start, t);
}

// Adam with bias correction; moments kept in double.
class Adam {
 public:
  struct Param {
    std::string name;
    Tensor::Ptr t;
    std::vector<double> m, v;
  };

  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void add_param(const std::string& name, const Tensor::Ptr& t) {
    Param p;
    p.name = name;
    p.t = t;
    p.m.assign(t->v.size(), 0.0);
    p.v.assign(t->v.size(), 0.0);
    params_.push_back(std::move(p));
  }

  void step(double lr) {
    if (lr <= 0.0) fail_usage("learning rate must be > 0");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, double(step_));
    const double bc2 = 1.0 - std::pow(beta2_, double(step_));
    for (auto& p : params_) {
      p.t->ensure_grad();
      for (size_t i = 0; i < p.t->v.size(); ++i) {
        const double g = p.t->g[i];
        p.m[i] = beta1_ * p.m[i] + (1.0 - beta1_) * g;
        p.v[i] = beta2_ * p.v[i] + (1.0 - beta2_) * g * g;
        const double mhat = p.m[i] / bc1;
        const double vhat = p.v[i] / bc2;
        p.t->v[i] =
            float(double(p.t->v[i]) - lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.t->zero_grad();
  }

  int64_t step_count() const { return step_; }
  const std::vector<Param>& params() const { return params_; }

  // Moment/step serialization for exact training resume. Doubles travel
  // as hex bit patterns so the restore is bit-exact.
  void save_state(std::ostream& os) const {
    os << "adam 1 " << step_ << ' ' << params_.size() << '\n';
    for (const auto& p : params_) {
      os << p.name << ' ' << p.m.size() << '\n';
      for (size_t i = 0; i < p.m.size(); ++i)
        os << std::hex << bits_of(p.m[i]) << ' ' << bits_of(p.v[i]) << '\n'
           << std::dec;
    }
  }

  void load_state(std::istream& is) {
    std::string tag;
    int version = 0;
    size_t count = 0;
    is >> tag >> version >> step_ >> count;
    if (tag != "adam" || version != 1 || count != params_.size())
      fail_data("optimizer state does not match the model");
    for (auto& p : params_) {
      std::string name;
      size_t n = 0;
      is >> name >> n;
      if (name != p.name || n != p.m.size())
        fail_data("optimizer state parameter mismatch: " + name);
      for (size_t i = 0; i < n; ++i) {
        uint64_t m_bits = 0, v_bits = 0;
        is >> std::hex >> m_bits >> v_bits >> std::dec;
        p.m[i] = double_of(m_bits);
        p.v[i] = double_of(v_bits);
      }
    }
    if (!is) fail_data("truncated optimizer state");
  }

 private:
  static uint64_t bits_of(double v) {
    uint64_t b;
    std::memcpy(&b, &v, 8);
    return b;
  }
  static double double_of(uint64_t b) {
    double v;
    std::memcpy(&v, &b, 8);
    return v;
  }

  double beta1_, beta2_, eps_;
  int64_t step_ = 0;
  std::vector<Param> params_;
};

}  // namespace hifind::nn

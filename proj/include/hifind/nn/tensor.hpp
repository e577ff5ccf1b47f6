#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "hifind/common.hpp"

namespace hifind::nn {

// Value node of the autodiff graph. Values are stored at precision T
// (float in the training engine; the finite-difference oracle instantiates
// double). Gradients always accumulate in 64-bit.
template <class T>
struct TensorT {
  using Ptr = std::shared_ptr<TensorT<T>>;

  std::vector<int64_t> shape;
  std::vector<T> v;
  std::vector<double> g;
  bool requires_grad = false;

  int64_t numel() const {
    int64_t n = 1;
    for (int64_t s : shape) n *= s;
    return n;
  }

  static Ptr make(std::vector<int64_t> shape, bool requires_grad = false) {
    auto t = std::make_shared<TensorT<T>>();
    t->shape = std::move(shape);
    t->v.assign(size_t(t->numel()), T(0));
    t->requires_grad = requires_grad;
    if (requires_grad) t->g.assign(t->v.size(), 0.0);
    return t;
  }

  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
  }

  void zero_grad() {
    for (double& x : g) x = 0.0;
  }
};

// Reverse-mode tape: ops append backward closures during the forward pass;
// backward() seeds the scalar loss gradient and runs them in reverse.
template <class T>
class TapeT {
 public:
  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

  // `seed` supports batch averaging: run backward once per sample with
  // seed 1/N and let parameter gradients accumulate.
  void backward(const typename TensorT<T>::Ptr& loss, double seed = 1.0) {
    if (loss->numel() != 1)
      fail_internal("backward requires a scalar loss tensor");
    loss->ensure_grad();
    loss->g[0] += seed;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace hifind::nn

#pragma once

#include <cmath>
#include <vector>

#include "hifind/nn/tensor.hpp"

namespace hifind::nn {

// Central finite-difference check of the analytic gradients. Runs the op
// at double precision (the f64-accumulation mode the check is defined on)
// with h = 1e-3 and returns the max relative error across all elements of
// all inputs with requires_grad. The error measure falls back to absolute
// for near-zero gradients:  |a - n| / max(|a|, |n|, 1).
//
// `loss_fn(tape, inputs)` must build a scalar from the given inputs and be
// re-evaluable (fresh tape each call).
template <class LossFn>
double grad_check(LossFn&& loss_fn,
                  const std::vector<TensorT<double>::Ptr>& inputs,
                  double h = 1e-3) {
  // Analytic pass.
  {
    TapeT<double> tape;
    auto loss = loss_fn(tape, inputs);
    for (const auto& t : inputs) t->zero_grad();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs)
    analytic.push_back(t->requires_grad ? t->g : std::vector<double>{});

  auto eval = [&]() {
    TapeT<double> tape;
    return double(loss_fn(tape, inputs)->v[0]);
  };

  double max_err = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = *inputs[ti];
    if (!t.requires_grad) continue;
    for (size_t i = 0; i < t.v.size(); ++i) {
      const double orig = t.v[i];
      t.v[i] = orig + h;
      const double lp = eval();
      t.v[i] = orig - h;
      const double lm = eval();
      t.v[i] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[ti][i];
      const double err = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1.0});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace hifind::nn

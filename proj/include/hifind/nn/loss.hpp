#pragma once

#include <cmath>

#include "hifind/nn/tensor.hpp"

namespace hifind::nn {

// Soft Dice over one sample:
//   dice = (2 sum(p y) + eps) / (sum(p) + sum(y) + eps),  loss = 1 - dice.
// The eps placement makes the empty-vs-empty case score exactly 1. Batch
// averaging is the caller's job (backward with seed 1/N per sample).
template <class T>
typename TensorT<T>::Ptr dice_loss(TapeT<T>& tape,
                                   const typename TensorT<T>::Ptr& pred,
                                   const typename TensorT<T>::Ptr& target,
                                   double eps = 1e-5) {
  if (pred->shape != target->shape)
    fail_internal("dice_loss shape mismatch");
  double sum_py = 0.0, sum_p = 0.0, sum_y = 0.0;
  for (size_t i = 0; i < pred->v.size(); ++i) {
    const double p = double(pred->v[i]);
    const double y = double(target->v[i]);
    sum_py += p * y;
    sum_p += p;
    sum_y += y;
  }
  const double num = 2.0 * sum_py + eps;
  const double den = sum_p + sum_y + eps;
  auto out = TensorT<T>::make({1});
  out->v[0] = T(1.0 - num / den);
  out->requires_grad = pred->requires_grad;
  if (out->requires_grad) {
    tape.record([pred, target, out, num, den]() {
      pred->ensure_grad();
      const double go = out->g[0];
      const double den2 = den * den;
      for (size_t i = 0; i < pred->v.size(); ++i) {
        const double y = double(target->v[i]);
        // d dice / dp_i = (2 y den - num) / den^2
        pred->g[i] += go * (-(2.0 * y * den - num) / den2);
      }
    });
  }
  return out;
}

// Mean binary cross-entropy; predictions are clamped to
// [clamp, 1-clamp] and the gradient is zero in the clamped region.
template <class T>
typename TensorT<T>::Ptr bce_loss(TapeT<T>& tape,
                                  const typename TensorT<T>::Ptr& pred,
                                  const typename TensorT<T>::Ptr& target,
                                  double clamp = 1e-7) {
  if (pred->shape != target->shape) fail_internal("bce_loss shape mismatch");
  const double n = double(pred->numel());
  double acc = 0.0;
  for (size_t i = 0; i < pred->v.size(); ++i) {
    const double p =
        std::min(std::max(double(pred->v[i]), clamp), 1.0 - clamp);
    const double y = double(target->v[i]);
    acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  auto out = TensorT<T>::make({1});
  out->v[0] = T(acc / n);
  out->requires_grad = pred->requires_grad;
  if (out->requires_grad) {
    tape.record([pred, target, out, clamp, n]() {
      pred->ensure_grad();
      const double go = out->g[0];
      for (size_t i = 0; i < pred->v.size(); ++i) {
        const double raw = double(pred->v[i]);
        if (raw < clamp || raw > 1.0 - clamp) continue;
        const double y = double(target->v[i]);
        pred->g[i] += go * (-(y / raw) + (1.0 - y) / (1.0 - raw)) / n;
      }
    });
  }
  return out;
}

// out = a + weight * b (scalars).
template <class T>
typename TensorT<T>::Ptr add_scaled(TapeT<T>& tape,
                                    const typename TensorT<T>::Ptr& a,
                                    const typename TensorT<T>::Ptr& b,
                                    double weight) {
  if (a->numel() != 1 || b->numel() != 1)
    fail_internal("add_scaled expects scalars");
  auto out = TensorT<T>::make({1});
  out->v[0] = T(double(a->v[0]) + weight * double(b->v[0]));
  out->requires_grad = a->requires_grad || b->requires_grad;
  if (out->requires_grad) {
    tape.record([a, b, out, weight]() {
      if (a->requires_grad) {
        a->ensure_grad();
        a->g[0] += out->g[0];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        b->g[0] += weight * out->g[0];
      }
    });
  }
  return out;
}

// Loss = L_dice + bce_weight * L_bce.
template <class T>
typename TensorT<T>::Ptr combined_loss(TapeT<T>& tape,
                                       const typename TensorT<T>::Ptr& pred,
                                       const typename TensorT<T>::Ptr& target,
                                       double bce_weight = 0.5) {
  auto dice = dice_loss(tape, pred, target);
  auto bce = bce_loss(tape, pred, target);
  return add_scaled(tape, dice, bce, bce_weight);
}

}  // namespace hifind::nn

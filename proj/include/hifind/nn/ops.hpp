#pragma once

#include <algorithm>
#include <cmath>

#include "hifind/nn/tensor.hpp"

// Volumetric layers on (C, F, R, D) tensors. Convolutions are
// cross-correlations with zero padding. Inner loops run over the
// contiguous Dec. axis; channel-level parallel loops write disjoint
// slices, so results do not depend on the thread count.

namespace hifind::nn {

inline int64_t idx4(int64_t c, int64_t f, int64_t r, int64_t d, int64_t F,
                    int64_t R, int64_t D) {
  return ((c * F + f) * R + r) * D + d;
}

template <class T>
void check_4d(const typename TensorT<T>::Ptr& t, const char* what) {
  if (t->shape.size() != 4) fail_internal(std::string(what) + " must be 4D");
}

// input (Ci,F,R,D), kernel (Co,Ci,kf,kr,kd), bias (Co) -> (Co,Fo,Ro,Do)
// with Xo = (X + 2p - k)/s + 1 per axis.
template <class T>
typename TensorT<T>::Ptr conv3d(TapeT<T>& tape,
                                const typename TensorT<T>::Ptr& in,
                                const typename TensorT<T>::Ptr& w,
                                const typename TensorT<T>::Ptr& b,
                                Vox3 pad = {0, 0, 0}, Vox3 stride = {1, 1, 1}) {
  check_4d<T>(in, "conv3d input");
  if (w->shape.size() != 5) fail_internal("conv3d kernel must be 5D");
  const int64_t Ci = in->shape[0], F = in->shape[1], R = in->shape[2],
                D = in->shape[3];
  const int64_t Co = w->shape[0], KF = w->shape[2], KR = w->shape[3],
                KD = w->shape[4];
  if (w->shape[1] != Ci) fail_internal("conv3d channel mismatch");
  if (b->numel() != Co) fail_internal("conv3d bias size mismatch");
  const int64_t Fo = (F + 2 * pad.f - KF) / stride.f + 1;
  const int64_t Ro = (R + 2 * pad.r - KR) / stride.r + 1;
  const int64_t Do = (D + 2 * pad.d - KD) / stride.d + 1;
  if (Fo < 1 || Ro < 1 || Do < 1) fail_internal("conv3d output is empty");

  auto out = TensorT<T>::make({Co, Fo, Ro, Do});
  out->requires_grad = in->requires_grad || w->requires_grad ||
                       b->requires_grad;
  const bool unit_stride = stride == Vox3{1, 1, 1};

  if (unit_stride) {
#pragma omp parallel for schedule(static)
    for (int64_t oc = 0; oc < Co; ++oc) {
      T* out_c = out->v.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
      std::fill(out_c, out_c + Fo * Ro * Do, b->v[size_t(oc)]);
      for (int64_t ic = 0; ic < Ci; ++ic) {
        const T* in_c = in->v.data() + idx4(ic, 0, 0, 0, F, R, D);
        for (int64_t kf = 0; kf < KF; ++kf) {
          const int64_t flo = std::max<int64_t>(0, pad.f - kf);
          const int64_t fhi = std::min(Fo, F + pad.f - kf);
          for (int64_t kr = 0; kr < KR; ++kr) {
            const int64_t rlo = std::max<int64_t>(0, pad.r - kr);
            const int64_t rhi = std::min(Ro, R + pad.r - kr);
            for (int64_t kd = 0; kd < KD; ++kd) {
              const int64_t dlo = std::max<int64_t>(0, pad.d - kd);
              const int64_t dhi = std::min(Do, D + pad.d - kd);
              if (flo >= fhi || rlo >= rhi || dlo >= dhi) continue;
              const T wv =
                  w->v[size_t(((((oc * Ci) + ic) * KF + kf) * KR + kr) * KD +
                              kd)];
              if (wv == T(0)) continue;
              for (int64_t f = flo; f < fhi; ++f)
                for (int64_t r = rlo; r < rhi; ++r) {
                  T* orow = out_c + (f * Ro + r) * Do + dlo;
                  const T* irow = in_c +
                                  ((f + kf - pad.f) * R + (r + kr - pad.r)) *
                                      D +
                                  (dlo + kd - pad.d);
                  for (int64_t i = 0; i < dhi - dlo; ++i)
                    orow[i] += wv * irow[i];
                }
            }
          }
        }
      }
    }
  } else {
#pragma omp parallel for schedule(static)
    for (int64_t oc = 0; oc < Co; ++oc)
      for (int64_t of = 0; of < Fo; ++of)
        for (int64_t orr = 0; orr < Ro; ++orr)
          for (int64_t od = 0; od < Do; ++od) {
            double acc = double(b->v[size_t(oc)]);
            for (int64_t ic = 0; ic < Ci; ++ic)
              for (int64_t kf = 0; kf < KF; ++kf) {
                const int64_t fi = of * stride.f + kf - pad.f;
                if (fi < 0 || fi >= F) continue;
                for (int64_t kr = 0; kr < KR; ++kr) {
                  const int64_t ri = orr * stride.r + kr - pad.r;
                  if (ri < 0 || ri >= R) continue;
                  for (int64_t kd = 0; kd < KD; ++kd) {
                    const int64_t di = od * stride.d + kd - pad.d;
                    if (di < 0 || di >= D) continue;
                    acc += double(in->v[size_t(idx4(ic, fi, ri, di, F, R, D))]) *
                           double(w->v[size_t(
                               ((((oc * Ci) + ic) * KF + kf) * KR + kr) * KD +
                               kd)]);
                  }
                }
              }
            out->v[size_t(idx4(oc, of, orr, od, Fo, Ro, Do))] = T(acc);
          }
  }

  if (out->requires_grad) {
    tape.record([in, w, b, out, pad, stride, Ci, F, R, D, Co, KF, KR, KD, Fo,
                 Ro, Do, unit_stride]() {
      if (b->requires_grad) {
        for (int64_t oc = 0; oc < Co; ++oc) {
          double acc = 0.0;
          const double* go = out->g.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
          for (int64_t i = 0; i < Fo * Ro * Do; ++i) acc += go[i];
          b->ensure_grad();
          b->g[size_t(oc)] += acc;
        }
      }
      if (w->requires_grad) {
        w->ensure_grad();
        if (unit_stride) {
#pragma omp parallel for schedule(static)
          for (int64_t oc = 0; oc < Co; ++oc) {
            const double* go = out->g.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
            for (int64_t ic = 0; ic < Ci; ++ic) {
              const T* in_c = in->v.data() + idx4(ic, 0, 0, 0, F, R, D);
              for (int64_t kf = 0; kf < KF; ++kf) {
                const int64_t flo = std::max<int64_t>(0, pad.f - kf);
                const int64_t fhi = std::min(Fo, F + pad.f - kf);
                for (int64_t kr = 0; kr < KR; ++kr) {
                  const int64_t rlo = std::max<int64_t>(0, pad.r - kr);
                  const int64_t rhi = std::min(Ro, R + pad.r - kr);
                  for (int64_t kd = 0; kd < KD; ++kd) {
                    const int64_t dlo = std::max<int64_t>(0, pad.d - kd);
                    const int64_t dhi = std::min(Do, D + pad.d - kd);
                    double acc = 0.0;
                    for (int64_t f = flo; f < fhi; ++f)
                      for (int64_t r = rlo; r < rhi; ++r) {
                        const double* grow = go + (f * Ro + r) * Do + dlo;
                        const T* irow =
                            in_c +
                            ((f + kf - pad.f) * R + (r + kr - pad.r)) * D +
                            (dlo + kd - pad.d);
                        for (int64_t i = 0; i < dhi - dlo; ++i)
                          acc += grow[i] * double(irow[i]);
                      }
                    w->g[size_t(((((oc * Ci) + ic) * KF + kf) * KR + kr) * KD +
                                kd)] += acc;
                  }
                }
              }
            }
          }
        } else {
          for (int64_t oc = 0; oc < Co; ++oc)
            for (int64_t of = 0; of < Fo; ++of)
              for (int64_t orr = 0; orr < Ro; ++orr)
                for (int64_t od = 0; od < Do; ++od) {
                  const double go =
                      out->g[size_t(idx4(oc, of, orr, od, Fo, Ro, Do))];
                  if (go == 0.0) continue;
                  for (int64_t ic = 0; ic < Ci; ++ic)
                    for (int64_t kf = 0; kf < KF; ++kf) {
                      const int64_t fi = of * stride.f + kf - pad.f;
                      if (fi < 0 || fi >= F) continue;
                      for (int64_t kr = 0; kr < KR; ++kr) {
                        const int64_t ri = orr * stride.r + kr - pad.r;
                        if (ri < 0 || ri >= R) continue;
                        for (int64_t kd = 0; kd < KD; ++kd) {
                          const int64_t di = od * stride.d + kd - pad.d;
                          if (di < 0 || di >= D) continue;
                          w->g[size_t(((((oc * Ci) + ic) * KF + kf) * KR + kr) *
                                          KD +
                                      kd)] +=
                              go *
                              double(
                                  in->v[size_t(idx4(ic, fi, ri, di, F, R, D))]);
                        }
                      }
                    }
                }
        }
      }
      if (in->requires_grad) {
        in->ensure_grad();
        if (unit_stride) {
#pragma omp parallel for schedule(static)
          for (int64_t ic = 0; ic < Ci; ++ic) {
            double* gi = in->g.data() + idx4(ic, 0, 0, 0, F, R, D);
            for (int64_t oc = 0; oc < Co; ++oc) {
              const double* go = out->g.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
              for (int64_t kf = 0; kf < KF; ++kf) {
                const int64_t flo = std::max<int64_t>(0, pad.f - kf);
                const int64_t fhi = std::min(Fo, F + pad.f - kf);
                for (int64_t kr = 0; kr < KR; ++kr) {
                  const int64_t rlo = std::max<int64_t>(0, pad.r - kr);
                  const int64_t rhi = std::min(Ro, R + pad.r - kr);
                  for (int64_t kd = 0; kd < KD; ++kd) {
                    const int64_t dlo = std::max<int64_t>(0, pad.d - kd);
                    const int64_t dhi = std::min(Do, D + pad.d - kd);
                    const double wv = double(
                        w->v[size_t(((((oc * Ci) + ic) * KF + kf) * KR + kr) *
                                        KD +
                                    kd)]);
                    if (wv == 0.0) continue;
                    for (int64_t f = flo; f < fhi; ++f)
                      for (int64_t r = rlo; r < rhi; ++r) {
                        const double* grow = go + (f * Ro + r) * Do + dlo;
                        double* girow =
                            gi +
                            ((f + kf - pad.f) * R + (r + kr - pad.r)) * D +
                            (dlo + kd - pad.d);
                        for (int64_t i = 0; i < dhi - dlo; ++i)
                          girow[i] += wv * grow[i];
                      }
                  }
                }
              }
            }
          }
        } else {
          for (int64_t oc = 0; oc < Co; ++oc)
            for (int64_t of = 0; of < Fo; ++of)
              for (int64_t orr = 0; orr < Ro; ++orr)
                for (int64_t od = 0; od < Do; ++od) {
                  const double go =
                      out->g[size_t(idx4(oc, of, orr, od, Fo, Ro, Do))];
                  if (go == 0.0) continue;
                  for (int64_t ic = 0; ic < Ci; ++ic)
                    for (int64_t kf = 0; kf < KF; ++kf) {
                      const int64_t fi = of * stride.f + kf - pad.f;
                      if (fi < 0 || fi >= F) continue;
                      for (int64_t kr = 0; kr < KR; ++kr) {
                        const int64_t ri = orr * stride.r + kr - pad.r;
                        if (ri < 0 || ri >= R) continue;
                        for (int64_t kd = 0; kd < KD; ++kd) {
                          const int64_t di = od * stride.d + kd - pad.d;
                          if (di < 0 || di >= D) continue;
                          in->g[size_t(idx4(ic, fi, ri, di, F, R, D))] +=
                              go *
                              double(w->v[size_t(
                                  ((((oc * Ci) + ic) * KF + kf) * KR + kr) *
                                      KD +
                                  kd)]);
                        }
                      }
                    }
                }
        }
      }
    });
  }
  return out;
}

// Disjoint-window max pooling; every spatial dim must divide by the window.
template <class T>
typename TensorT<T>::Ptr maxpool3d(TapeT<T>& tape,
                                   const typename TensorT<T>::Ptr& in,
                                   Vox3 window = {2, 2, 2}) {
  check_4d<T>(in, "maxpool3d input");
  const int64_t C = in->shape[0], F = in->shape[1], R = in->shape[2],
                D = in->shape[3];
  if (F % window.f || R % window.r || D % window.d)
    fail_internal("maxpool3d dims not divisible by window");
  const int64_t Fo = F / window.f, Ro = R / window.r, Do = D / window.d;
  auto out = TensorT<T>::make({C, Fo, Ro, Do});
  out->requires_grad = in->requires_grad;
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(out->numel()));

  for (int64_t c = 0; c < C; ++c)
    for (int64_t of = 0; of < Fo; ++of)
      for (int64_t orr = 0; orr < Ro; ++orr)
        for (int64_t od = 0; od < Do; ++od) {
          T best{};
          int64_t best_i = -1;
          for (int64_t kf = 0; kf < window.f; ++kf)
            for (int64_t kr = 0; kr < window.r; ++kr)
              for (int64_t kd = 0; kd < window.d; ++kd) {
                const int64_t i =
                    idx4(c, of * window.f + kf, orr * window.r + kr,
                         od * window.d + kd, F, R, D);
                if (best_i < 0 || in->v[size_t(i)] > best) {
                  best = in->v[size_t(i)];
                  best_i = i;
                }
              }
          const int64_t o = idx4(c, of, orr, od, Fo, Ro, Do);
          out->v[size_t(o)] = best;
          (*argmax)[size_t(o)] = best_i;
        }

  if (out->requires_grad) {
    tape.record([in, out, argmax]() {
      in->ensure_grad();
      for (size_t i = 0; i < out->g.size(); ++i)
        in->g[size_t((*argmax)[i])] += out->g[i];
    });
  }
  return out;
}

// Learned upsampling: kernel (Ci,Co,k,k,k) with stride = kernel size, so
// output windows are disjoint. Output is exactly `factor` times larger.
template <class T>
typename TensorT<T>::Ptr conv_transpose3d(TapeT<T>& tape,
                                          const typename TensorT<T>::Ptr& in,
                                          const typename TensorT<T>::Ptr& w,
                                          const typename TensorT<T>::Ptr& b,
                                          int64_t factor = 2) {
  check_4d<T>(in, "conv_transpose3d input");
  if (w->shape.size() != 5) fail_internal("conv_transpose3d kernel must be 5D");
  const int64_t Ci = in->shape[0], F = in->shape[1], R = in->shape[2],
                D = in->shape[3];
  const int64_t Co = w->shape[1], K = factor;
  if (w->shape[0] != Ci || w->shape[2] != K || w->shape[3] != K ||
      w->shape[4] != K)
    fail_internal("conv_transpose3d kernel shape mismatch");
  if (b->numel() != Co) fail_internal("conv_transpose3d bias size mismatch");
  const int64_t Fo = F * K, Ro = R * K, Do = D * K;
  auto out = TensorT<T>::make({Co, Fo, Ro, Do});
  out->requires_grad = in->requires_grad || w->requires_grad ||
                       b->requires_grad;

#pragma omp parallel for schedule(static)
  for (int64_t oc = 0; oc < Co; ++oc) {
    T* out_c = out->v.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
    std::fill(out_c, out_c + Fo * Ro * Do, b->v[size_t(oc)]);
    for (int64_t ic = 0; ic < Ci; ++ic) {
      const T* in_c = in->v.data() + idx4(ic, 0, 0, 0, F, R, D);
      for (int64_t f = 0; f < F; ++f)
        for (int64_t r = 0; r < R; ++r)
          for (int64_t d = 0; d < D; ++d) {
            const T v = in_c[(f * R + r) * D + d];
            if (v == T(0)) continue;
            for (int64_t kf = 0; kf < K; ++kf)
              for (int64_t kr = 0; kr < K; ++kr) {
                T* orow = out_c + ((f * K + kf) * Ro + (r * K + kr)) * Do +
                          d * K;
                const T* wrow =
                    w->v.data() +
                    size_t(((((ic * Co) + oc) * K + kf) * K + kr) * K);
                for (int64_t kd = 0; kd < K; ++kd) orow[kd] += v * wrow[kd];
              }
          }
    }
  }

  if (out->requires_grad) {
    tape.record([in, w, b, out, Ci, F, R, D, Co, K, Fo, Ro, Do]() {
      if (b->requires_grad) {
        b->ensure_grad();
        for (int64_t oc = 0; oc < Co; ++oc) {
          double acc = 0.0;
          const double* go = out->g.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
          for (int64_t i = 0; i < Fo * Ro * Do; ++i) acc += go[i];
          b->g[size_t(oc)] += acc;
        }
      }
      if (w->requires_grad || in->requires_grad) {
        if (w->requires_grad) w->ensure_grad();
        if (in->requires_grad) in->ensure_grad();
#pragma omp parallel for schedule(static)
        for (int64_t ic = 0; ic < Ci; ++ic) {
          const T* in_c = in->v.data() + idx4(ic, 0, 0, 0, F, R, D);
          double* gi = in->requires_grad
                           ? in->g.data() + idx4(ic, 0, 0, 0, F, R, D)
                           : nullptr;
          for (int64_t oc = 0; oc < Co; ++oc) {
            const double* go = out->g.data() + idx4(oc, 0, 0, 0, Fo, Ro, Do);
            for (int64_t f = 0; f < F; ++f)
              for (int64_t r = 0; r < R; ++r)
                for (int64_t d = 0; d < D; ++d) {
                  const int64_t ii = (f * R + r) * D + d;
                  double gin_acc = 0.0;
                  for (int64_t kf = 0; kf < K; ++kf)
                    for (int64_t kr = 0; kr < K; ++kr) {
                      const double* grow =
                          go + ((f * K + kf) * Ro + (r * K + kr)) * Do + d * K;
                      const size_t wbase =
                          size_t(((((ic * Co) + oc) * K + kf) * K + kr) * K);
                      for (int64_t kd = 0; kd < K; ++kd) {
                        if (w->requires_grad)
                          w->g[wbase + size_t(kd)] +=
                              grow[kd] * double(in_c[ii]);
                        gin_acc += grow[kd] * double(w->v[wbase + size_t(kd)]);
                      }
                    }
                  if (gi) gi[ii] += gin_acc;
                }
          }
        }
      }
    });
  }
  return out;
}

// Per-channel normalization with learned affine; statistics in double.
template <class T>
typename TensorT<T>::Ptr instance_norm(TapeT<T>& tape,
                                       const typename TensorT<T>::Ptr& in,
                                       const typename TensorT<T>::Ptr& gamma,
                                       const typename TensorT<T>::Ptr& beta,
                                       double eps = 1e-5) {
  check_4d<T>(in, "instance_norm input");
  const int64_t C = in->shape[0];
  const int64_t N = in->numel() / C;
  if (gamma->numel() != C || beta->numel() != C)
    fail_internal("instance_norm affine size mismatch");
  auto out = TensorT<T>::make(in->shape);
  out->requires_grad =
      in->requires_grad || gamma->requires_grad || beta->requires_grad;
  auto mean = std::make_shared<std::vector<double>>(size_t(C));
  auto invstd = std::make_shared<std::vector<double>>(size_t(C));

  for (int64_t c = 0; c < C; ++c) {
    const T* x = in->v.data() + c * N;
    double mu = 0.0;
    for (int64_t i = 0; i < N; ++i) mu += double(x[i]);
    mu /= double(N);
    double var = 0.0;
    for (int64_t i = 0; i < N; ++i) {
      const double dv = double(x[i]) - mu;
      var += dv * dv;
    }
    var /= double(N);
    const double is = 1.0 / std::sqrt(var + eps);
    (*mean)[size_t(c)] = mu;
    (*invstd)[size_t(c)] = is;
    const double gm = double(gamma->v[size_t(c)]);
    const double bt = double(beta->v[size_t(c)]);
    T* y = out->v.data() + c * N;
    for (int64_t i = 0; i < N; ++i)
      y[i] = T(gm * (double(x[i]) - mu) * is + bt);
  }

  if (out->requires_grad) {
    tape.record([in, gamma, beta, out, mean, invstd, C, N]() {
      for (int64_t c = 0; c < C; ++c) {
        const T* x = in->v.data() + c * N;
        const double* go = out->g.data() + size_t(c * N);
        const double mu = (*mean)[size_t(c)];
        const double is = (*invstd)[size_t(c)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int64_t i = 0; i < N; ++i) {
          const double xh = (double(x[i]) - mu) * is;
          sum_g += go[i];
          sum_gx += go[i] * xh;
        }
        if (gamma->requires_grad) {
          gamma->ensure_grad();
          gamma->g[size_t(c)] += sum_gx;
        }
        if (beta->requires_grad) {
          beta->ensure_grad();
          beta->g[size_t(c)] += sum_g;
        }
        if (in->requires_grad) {
          in->ensure_grad();
          double* gi = in->g.data() + size_t(c * N);
          const double gm = double(gamma->v[size_t(c)]);
          const double mg = sum_g / double(N);
          const double mgx = sum_gx / double(N);
          for (int64_t i = 0; i < N; ++i) {
            const double xh = (double(x[i]) - mu) * is;
            gi[i] += gm * is * (go[i] - mg - xh * mgx);
          }
        }
      }
    });
  }
  return out;
}

template <class T>
typename TensorT<T>::Ptr relu(TapeT<T>& tape,
                              const typename TensorT<T>::Ptr& in) {
  auto out = TensorT<T>::make(in->shape);
  out->requires_grad = in->requires_grad;
  for (size_t i = 0; i < in->v.size(); ++i)
    out->v[i] = in->v[i] > T(0) ? in->v[i] : T(0);
  if (out->requires_grad) {
    tape.record([in, out]() {
      in->ensure_grad();
      for (size_t i = 0; i < in->v.size(); ++i)
        if (in->v[i] > T(0)) in->g[i] += out->g[i];
    });
  }
  return out;
}

template <class T>
typename TensorT<T>::Ptr sigmoid(TapeT<T>& tape,
                                 const typename TensorT<T>::Ptr& in) {
  auto out = TensorT<T>::make(in->shape);
  out->requires_grad = in->requires_grad;
  for (size_t i = 0; i < in->v.size(); ++i)
    out->v[i] = T(1.0 / (1.0 + std::exp(-double(in->v[i]))));
  if (out->requires_grad) {
    tape.record([in, out]() {
      in->ensure_grad();
      for (size_t i = 0; i < in->v.size(); ++i) {
        const double s = double(out->v[i]);
        in->g[i] += out->g[i] * s * (1.0 - s);
      }
    });
  }
  return out;
}

// Channel concatenation (skip connections).
template <class T>
typename TensorT<T>::Ptr concat_channels(TapeT<T>& tape,
                                         const typename TensorT<T>::Ptr& a,
                                         const typename TensorT<T>::Ptr& b) {
  check_4d<T>(a, "concat input");
  check_4d<T>(b, "concat input");
  if (a->shape[1] != b->shape[1] || a->shape[2] != b->shape[2] ||
      a->shape[3] != b->shape[3])
    fail_internal("concat spatial shape mismatch");
  auto out = TensorT<T>::make(
      {a->shape[0] + b->shape[0], a->shape[1], a->shape[2], a->shape[3]});
  out->requires_grad = a->requires_grad || b->requires_grad;
  std::copy(a->v.begin(), a->v.end(), out->v.begin());
  std::copy(b->v.begin(), b->v.end(), out->v.begin() + a->v.size());
  if (out->requires_grad) {
    tape.record([a, b, out]() {
      if (a->requires_grad) {
        a->ensure_grad();
        for (size_t i = 0; i < a->g.size(); ++i) a->g[i] += out->g[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (size_t i = 0; i < b->g.size(); ++i)
          b->g[i] += out->g[a->v.size() + i];
      }
    });
  }
  return out;
}

}  // namespace hifind::nn

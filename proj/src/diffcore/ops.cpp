/* Copyright 2026 The ARBB Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "arbb/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kernels.hpp"

namespace arbb {

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ConfigError("stride must be positive");
  if (kernel == 0) throw ConfigError("kernel size must be positive");
  if (in + 2 * pad < kernel) {
    throw ConfigError("kernel " + std::to_string(kernel) + " larger than padded input " + std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects [N,K] logits");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const float* z = logits.ptr() + n * K;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(z[k]));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z[k] - mx);
    for (std::size_t k = 0; k < K; ++k) out[n * K + k] = static_cast<float>(std::exp(z[k] - mx) / s);
  }
  return out;
}

double cross_entropy_value(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) throw ShapeError("cross entropy shape mismatch");
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= K) {
      throw LabelError("label " + std::to_string(labels[n]) + " outside [0," + std::to_string(K) + ")");
    }
    const float* z = logits.ptr() + n * K;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(z[k]));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(z[k] - mx);
    total += mx + std::log(s) - z[labels[n]];
  }
  return total / static_cast<double>(N);
}

}  // namespace arbb

namespace arbb::ops {

namespace {

template <class T>
using TT = BasicTensor<T>;

template <class T>
TT<T> from_double(const Shape& shape, const std::vector<double>& v) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
  return TT<T>(shape, std::move(out));
}

// Layout of a tensor with channels on axis 1: outer = N, inner = prod(dims[2:]).
struct ChannelLayout {
  std::size_t outer, channels, inner;
};

ChannelLayout channel_layout(const Shape& s, const char* op) {
  if (s.size() < 2) throw ShapeError(std::string(op) + " expects a tensor with a channel axis, got " + to_string(s));
  std::size_t inner = 1;
  for (std::size_t d = 2; d < s.size(); ++d) inner *= s[d];
  return {s[0], s[1], inner};
}

double sgn0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

template <class T>
Var<T> linear(Graph<T>& g, Var<T> x, Var<T> w, std::optional<Var<T>> b) {
  const auto& X = g.value(x);
  const auto& W = g.value(w);
  if (X.rank() != 2 || W.rank() != 2 || X.dim(1) != W.dim(1)) {
    throw ShapeError("linear: input " + to_string(X.shape()) + " vs weight " + to_string(W.shape()));
  }
  const std::size_t N = X.dim(0), I = X.dim(1), O = W.dim(0);
  if (b && g.value(*b).size() != O) throw ShapeError("linear: bias size mismatch");
  std::vector<double> acc(N * O, 0.0);
  kernels::gemm_nt(N, O, I, X.ptr(), W.ptr(), acc.data());
  if (b) {
    const auto& B = g.value(*b);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < O; ++o) acc[n * O + o] += B[o];
  }
  std::vector<Var<T>> ins{x, w};
  if (b) ins.push_back(*b);
  return g.record("linear", from_double<T>({N, O}, acc), ins, [x, w, b, N, I, O](Graph<T>& g, const TT<T>& go) {
    const auto& X = g.value(x);
    const auto& W = g.value(w);
    if (g.requires_grad(x)) {
      std::vector<double> gx(N * I, 0.0);
      kernels::gemm_nn(N, I, O, go.ptr(), W.ptr(), gx.data());
      g.accumulate(x, from_double<T>(X.shape(), gx));
    }
    if (g.requires_grad(w)) {
      std::vector<double> gw(O * I, 0.0);
      kernels::gemm_tn(N, I, O, go.ptr(), X.ptr(), gw.data());
      g.accumulate(w, from_double<T>(W.shape(), gw));
    }
    if (b && g.requires_grad(*b)) {
      std::vector<double> gb(O, 0.0);
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < O; ++o) gb[o] += go[n * O + o];
      g.accumulate(*b, from_double<T>(g.value(*b).shape(), gb));
    }
  });
}

template <class T>
Var<T> conv2d(Graph<T>& g, Var<T> x, Var<T> w, std::optional<Var<T>> b, Conv2dGeometry geo) {
  const auto& X = g.value(x);
  const auto& W = g.value(w);
  if (X.rank() != 4 || W.rank() != 4 || X.dim(1) != W.dim(1)) {
    throw ShapeError("conv2d: input " + to_string(X.shape()) + " vs weight " + to_string(W.shape()));
  }
  kernels::ConvShape cs{};
  cs.channels = X.dim(1);
  cs.height = X.dim(2);
  cs.width = X.dim(3);
  cs.kh = W.dim(2);
  cs.kw = W.dim(3);
  cs.stride = geo.stride;
  cs.pad = geo.pad;
  cs.out_h = conv_out_size(cs.height, cs.kh, cs.stride, cs.pad);
  cs.out_w = conv_out_size(cs.width, cs.kw, cs.stride, cs.pad);
  const std::size_t N = X.dim(0), O = W.dim(0), K = cs.rows(), P = cs.cols();
  const std::size_t img = cs.channels * cs.height * cs.width;
  if (b && g.value(*b).size() != O) throw ShapeError("conv2d: bias size mismatch");

  std::vector<T> cols(K * P);
  std::vector<double> acc(N * O * P, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    kernels::im2col(cs, X.ptr() + n * img, cols.data());
    kernels::gemm_nn(O, P, K, W.ptr(), cols.data(), acc.data() + n * O * P);
  }
  if (b) {
    const auto& B = g.value(*b);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t p = 0; p < P; ++p) acc[(n * O + o) * P + p] += B[o];
  }
  std::vector<Var<T>> ins{x, w};
  if (b) ins.push_back(*b);
  return g.record(
      "conv2d", from_double<T>({N, O, cs.out_h, cs.out_w}, acc), ins,
      [x, w, b, cs, N, O, K, P, img](Graph<T>& g, const TT<T>& go) {
        const auto& X = g.value(x);
        const auto& W = g.value(w);
        const bool need_x = g.requires_grad(x), need_w = g.requires_grad(w);
        std::vector<T> cols(K * P);
        std::vector<double> gw(need_w ? O * K : 0, 0.0);
        std::vector<double> gx(need_x ? N * img : 0, 0.0);
        std::vector<double> gcols(need_x ? K * P : 0);
        std::vector<T> gcols_t(need_x ? K * P : 0);
        for (std::size_t n = 0; n < N; ++n) {
          const T* gout = go.ptr() + n * O * P;
          if (need_w) {
            kernels::im2col(cs, X.ptr() + n * img, cols.data());
            kernels::gemm_nt(O, K, P, gout, cols.data(), gw.data());
          }
          if (need_x) {
            std::fill(gcols.begin(), gcols.end(), 0.0);
            kernels::gemm_tn(O, P, K, W.ptr(), gout, gcols.data());
            for (std::size_t i = 0; i < K * P; ++i) gcols_t[i] = static_cast<T>(gcols[i]);
            kernels::col2im(cs, gcols_t.data(), gx.data() + n * img);
          }
        }
        if (need_x) g.accumulate(x, from_double<T>(X.shape(), gx));
        if (need_w) g.accumulate(w, from_double<T>(W.shape(), gw));
        if (b && g.requires_grad(*b)) {
          std::vector<double> gb(O, 0.0);
          for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < O; ++o)
              for (std::size_t p = 0; p < P; ++p) gb[o] += go[(n * O + o) * P + p];
          g.accumulate(*b, from_double<T>(g.value(*b).shape(), gb));
        }
      });
}

template <class T>
Var<T> batch_norm(Graph<T>& g, Var<T> x, Var<T> gamma, Var<T> beta, BatchNormBuffers& buffers) {
  const auto& X = g.value(x);
  const auto L = channel_layout(X.shape(), "batch_norm");
  const auto& G = g.value(gamma);
  const auto& B = g.value(beta);
  if (G.size() != L.channels || B.size() != L.channels || buffers.running_mean.size() != L.channels ||
      buffers.running_var.size() != L.channels) {
    throw ShapeError("batch_norm: channel count mismatch for " + to_string(X.shape()));
  }
  const double count = static_cast<double>(L.outer * L.inner);
  std::vector<double> mean(L.channels), inv_std(L.channels);
  const bool batch_stats = g.training();
  if (batch_stats) {
    for (std::size_t c = 0; c < L.channels; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < L.outer; ++n)
        for (std::size_t i = 0; i < L.inner; ++i) s += X[(n * L.channels + c) * L.inner + i];
      const double m = s / count;
      double v = 0.0;
      for (std::size_t n = 0; n < L.outer; ++n)
        for (std::size_t i = 0; i < L.inner; ++i) {
          const double d = X[(n * L.channels + c) * L.inner + i] - m;
          v += d * d;
        }
      v /= count;
      mean[c] = m;
      inv_std[c] = 1.0 / std::sqrt(v + buffers.eps);
      if (g.update_running_stats()) {
        const double unbiased = count > 1.0 ? v * count / (count - 1.0) : v;
        const double mo = buffers.momentum;
        buffers.running_mean[c] = static_cast<float>((1.0 - mo) * buffers.running_mean[c] + mo * m);
        buffers.running_var[c] = static_cast<float>((1.0 - mo) * buffers.running_var[c] + mo * unbiased);
      }
    }
  } else {
    for (std::size_t c = 0; c < L.channels; ++c) {
      mean[c] = buffers.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(buffers.running_var[c]) + buffers.eps);
    }
  }
  std::vector<double> y(X.size());
  for (std::size_t n = 0; n < L.outer; ++n)
    for (std::size_t c = 0; c < L.channels; ++c)
      for (std::size_t i = 0; i < L.inner; ++i) {
        const std::size_t idx = (n * L.channels + c) * L.inner + i;
        y[idx] = static_cast<double>(G[c]) * (X[idx] - mean[c]) * inv_std[c] + static_cast<double>(B[c]);
      }
  return g.record(
      "batch_norm", from_double<T>(X.shape(), y), {x, gamma, beta},
      [x, gamma, beta, L, mean, inv_std, batch_stats, count](Graph<T>& g, const TT<T>& go) {
        const auto& X = g.value(x);
        const auto& G = g.value(gamma);
        std::vector<double> sum_dy(L.channels, 0.0), sum_dy_xhat(L.channels, 0.0);
        for (std::size_t n = 0; n < L.outer; ++n)
          for (std::size_t c = 0; c < L.channels; ++c)
            for (std::size_t i = 0; i < L.inner; ++i) {
              const std::size_t idx = (n * L.channels + c) * L.inner + i;
              const double xhat = (X[idx] - mean[c]) * inv_std[c];
              sum_dy[c] += go[idx];
              sum_dy_xhat[c] += go[idx] * xhat;
            }
        if (g.requires_grad(x)) {
          std::vector<double> gx(X.size());
          for (std::size_t n = 0; n < L.outer; ++n)
            for (std::size_t c = 0; c < L.channels; ++c)
              for (std::size_t i = 0; i < L.inner; ++i) {
                const std::size_t idx = (n * L.channels + c) * L.inner + i;
                const double k = static_cast<double>(G[c]) * inv_std[c];
                if (batch_stats) {
                  const double xhat = (X[idx] - mean[c]) * inv_std[c];
                  gx[idx] = k / count * (count * go[idx] - sum_dy[c] - xhat * sum_dy_xhat[c]);
                } else {
                  gx[idx] = k * go[idx];
                }
              }
          g.accumulate(x, from_double<T>(X.shape(), gx));
        }
        if (g.requires_grad(gamma)) g.accumulate(gamma, from_double<T>(G.shape(), sum_dy_xhat));
        if (g.requires_grad(beta)) g.accumulate(beta, from_double<T>(g.value(beta).shape(), sum_dy));
      });
}

template <class T>
Var<T> hardtanh(Graph<T>& g, Var<T> x) {
  const auto& X = g.value(x);
  TT<T> y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) y[i] = std::clamp(X[i], T{-1}, T{1});
  return g.record("hardtanh", std::move(y), {x}, [x](Graph<T>& g, const TT<T>& go) {
    const auto& X = g.value(x);
    TT<T> gx(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) gx[i] = std::abs(X[i]) <= T{1} ? go[i] : T{0};
    g.accumulate(x, gx);
  });
}

template <class T>
Var<T> prelu(Graph<T>& g, Var<T> x, Var<T> slope) {
  const auto& X = g.value(x);
  const auto L = channel_layout(X.shape(), "prelu");
  const auto& A = g.value(slope);
  if (A.size() != L.channels) throw ShapeError("prelu: slope size mismatch");
  TT<T> y(X.shape());
  for (std::size_t idx = 0; idx < X.size(); ++idx) {
    const std::size_t c = (idx / L.inner) % L.channels;
    y[idx] = X[idx] > T{0} ? X[idx] : A[c] * X[idx];
  }
  return g.record("prelu", std::move(y), {x, slope}, [x, slope, L](Graph<T>& g, const TT<T>& go) {
    const auto& X = g.value(x);
    const auto& A = g.value(slope);
    TT<T> gx(X.shape());
    std::vector<double> ga(L.channels, 0.0);
    for (std::size_t idx = 0; idx < X.size(); ++idx) {
      const std::size_t c = (idx / L.inner) % L.channels;
      if (X[idx] > T{0}) {
        gx[idx] = go[idx];
      } else {
        gx[idx] = A[c] * go[idx];
        ga[c] += static_cast<double>(X[idx]) * go[idx];
      }
    }
    g.accumulate(x, gx);
    if (g.requires_grad(slope)) g.accumulate(slope, from_double<T>(A.shape(), ga));
  });
}

template <class T>
Var<T> channel_bias(Graph<T>& g, Var<T> x, Var<T> b, double coeff) {
  const auto& X = g.value(x);
  const auto L = channel_layout(X.shape(), "channel_bias");
  const auto& B = g.value(b);
  if (B.size() != L.channels) throw ShapeError("channel_bias: size mismatch");
  TT<T> y(X.shape());
  for (std::size_t idx = 0; idx < X.size(); ++idx) {
    const std::size_t c = (idx / L.inner) % L.channels;
    y[idx] = static_cast<T>(X[idx] + coeff * B[c]);
  }
  return g.record("channel_bias", std::move(y), {x, b}, [x, b, L, coeff](Graph<T>& g, const TT<T>& go) {
    g.accumulate(x, go);
    if (g.requires_grad(b)) {
      std::vector<double> gb(L.channels, 0.0);
      for (std::size_t idx = 0; idx < go.size(); ++idx) gb[(idx / L.inner) % L.channels] += coeff * go[idx];
      g.accumulate(b, from_double<T>(g.value(b).shape(), gb));
    }
  });
}

template <class T>
Var<T> channel_scale(Graph<T>& g, Var<T> x, Var<T> s) {
  const auto& X = g.value(x);
  const auto L = channel_layout(X.shape(), "channel_scale");
  const auto& S = g.value(s);
  const bool scalar = S.size() == 1;
  if (!scalar && S.size() != L.channels) throw ShapeError("channel_scale: size mismatch");
  TT<T> y(X.shape());
  for (std::size_t idx = 0; idx < X.size(); ++idx) {
    const std::size_t c = scalar ? 0 : (idx / L.inner) % L.channels;
    y[idx] = X[idx] * S[c];
  }
  return g.record("channel_scale", std::move(y), {x, s}, [x, s, L, scalar](Graph<T>& g, const TT<T>& go) {
    const auto& X = g.value(x);
    const auto& S = g.value(s);
    if (g.requires_grad(x)) {
      TT<T> gx(X.shape());
      for (std::size_t idx = 0; idx < X.size(); ++idx) {
        gx[idx] = go[idx] * S[scalar ? 0 : (idx / L.inner) % L.channels];
      }
      g.accumulate(x, gx);
    }
    if (g.requires_grad(s)) {
      std::vector<double> gs(S.size(), 0.0);
      for (std::size_t idx = 0; idx < X.size(); ++idx) {
        gs[scalar ? 0 : (idx / L.inner) % L.channels] += static_cast<double>(X[idx]) * go[idx];
      }
      g.accumulate(s, from_double<T>(S.shape(), gs));
    }
  });
}

template <class T>
Var<T> avg_pool2d(Graph<T>& g, Var<T> x, std::size_t kernel, std::size_t stride) {
  const auto& X = g.value(x);
  if (X.rank() != 4) throw ShapeError("avg_pool2d expects [N,C,H,W]");
  const std::size_t N = X.dim(0), C = X.dim(1), H = X.dim(2), W = X.dim(3);
  const std::size_t Ho = conv_out_size(H, kernel, stride, 0), Wo = conv_out_size(W, kernel, stride, 0);
  const double inv = 1.0 / static_cast<double>(kernel * kernel);
  TT<T> y({N, C, Ho, Wo});
  for (std::size_t nc = 0; nc < N * C; ++nc)
    for (std::size_t oy = 0; oy < Ho; ++oy)
      for (std::size_t ox = 0; ox < Wo; ++ox) {
        double s = 0.0;
        for (std::size_t ky = 0; ky < kernel; ++ky)
          for (std::size_t kx = 0; kx < kernel; ++kx) s += X[(nc * H + oy * stride + ky) * W + ox * stride + kx];
        y[(nc * Ho + oy) * Wo + ox] = static_cast<T>(s * inv);
      }
  return g.record("avg_pool2d", std::move(y), {x},
                  [x, N, C, H, W, Ho, Wo, kernel, stride, inv](Graph<T>& g, const TT<T>& go) {
                    std::vector<double> gx(N * C * H * W, 0.0);
                    for (std::size_t nc = 0; nc < N * C; ++nc)
                      for (std::size_t oy = 0; oy < Ho; ++oy)
                        for (std::size_t ox = 0; ox < Wo; ++ox) {
                          const double v = go[(nc * Ho + oy) * Wo + ox] * inv;
                          for (std::size_t ky = 0; ky < kernel; ++ky)
                            for (std::size_t kx = 0; kx < kernel; ++kx)
                              gx[(nc * H + oy * stride + ky) * W + ox * stride + kx] += v;
                        }
                    g.accumulate(x, from_double<T>(g.value(x).shape(), gx));
                  });
}

template <class T>
Var<T> global_avg_pool(Graph<T>& g, Var<T> x) {
  const auto& X = g.value(x);
  if (X.rank() != 4) throw ShapeError("global_avg_pool expects [N,C,H,W]");
  const std::size_t N = X.dim(0), C = X.dim(1), HW = X.dim(2) * X.dim(3);
  TT<T> y({N, C});
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    double s = 0.0;
    for (std::size_t i = 0; i < HW; ++i) s += X[nc * HW + i];
    y[nc] = static_cast<T>(s / static_cast<double>(HW));
  }
  return g.record("global_avg_pool", std::move(y), {x}, [x, N, C, HW](Graph<T>& g, const TT<T>& go) {
    TT<T> gx(g.value(x).shape());
    const double inv = 1.0 / static_cast<double>(HW);
    for (std::size_t nc = 0; nc < N * C; ++nc) {
      const T v = static_cast<T>(go[nc] * inv);
      for (std::size_t i = 0; i < HW; ++i) gx[nc * HW + i] = v;
    }
    g.accumulate(x, gx);
  });
}

template <class T>
Var<T> add(Graph<T>& g, Var<T> a, Var<T> b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  if (A.shape() != B.shape()) throw ShapeError("add: " + to_string(A.shape()) + " vs " + to_string(B.shape()));
  TT<T> y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = A[i] + B[i];
  return g.record("add", std::move(y), {a, b}, [a, b](Graph<T>& g, const TT<T>& go) {
    g.accumulate(a, go);
    g.accumulate(b, go);
  });
}

template <class T>
Var<T> scale(Graph<T>& g, Var<T> a, double c) {
  const auto& A = g.value(a);
  TT<T> y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = static_cast<T>(A[i] * c);
  return g.record("scale", std::move(y), {a}, [a, c](Graph<T>& g, const TT<T>& go) {
    TT<T> ga(go.shape());
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] = static_cast<T>(go[i] * c);
    g.accumulate(a, ga);
  });
}

template <class T>
Var<T> sign_binarize(Graph<T>& g, Var<T> x, Surrogate rule, double tau) {
  if (rule == Surrogate::None) throw ConfigError("sign node requires a surrogate rule");
  if (!(tau > 0.0)) throw ConfigError("surrogate clamp bound must be positive");
  const auto& X = g.value(x);
  TT<T> y(X.shape());
  if (g.smooth_surrogate()) {
    for (std::size_t i = 0; i < X.size(); ++i) y[i] = static_cast<T>(surrogate_value(rule, X[i], tau));
  } else {
    for (std::size_t i = 0; i < X.size(); ++i) y[i] = sign_pm1(X[i]);
  }
  return g.record("sign", std::move(y), {x}, [x, rule, tau](Graph<T>& g, const TT<T>& go) {
    const auto& X = g.value(x);
    TT<T> gx(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) {
      gx[i] = static_cast<T>(surrogate_derivative(rule, X[i], tau) * go[i]);
    }
    g.accumulate(x, gx);
  });
}

template <class T>
Var<T> weight_scale_of(Graph<T>& g, Var<T> w, ScaleRule rule, double tau) {
  const auto& W = g.value(w);
  if (W.rank() == 0) throw ShapeError("weight scale of an empty tensor");
  const std::size_t O = W.dim(0), per = W.size() / O;
  const bool layer = rule == ScaleRule::LayerMeanAbs;
  const bool clamped = rule == ScaleRule::ClampedChannelMeanAbs;
  if (!layer && !clamped && rule != ScaleRule::ChannelMeanAbs) {
    throw ConfigError("weight_scale_of handles mean-absolute rules only");
  }
  const double bound = clamped ? tau : std::numeric_limits<double>::infinity();
  const std::size_t groups = layer ? 1 : O;
  const std::size_t group_size = layer ? W.size() : per;
  std::vector<double> alpha(groups, 0.0);
  for (std::size_t i = 0; i < W.size(); ++i) alpha[i / group_size] += std::min(std::abs(static_cast<double>(W[i])), bound);
  for (auto& a : alpha) a /= static_cast<double>(group_size);
  return g.record("weight_scale", from_double<T>({groups}, alpha), {w},
                  [w, group_size, bound](Graph<T>& g, const TT<T>& go) {
                    const auto& W = g.value(w);
                    TT<T> gw(W.shape());
                    const double inv = 1.0 / static_cast<double>(group_size);
                    for (std::size_t i = 0; i < W.size(); ++i) {
                      const double v = W[i];
                      const double d = std::abs(v) < bound ? sgn0(v) * inv : 0.0;
                      gw[i] = static_cast<T>(d * go[i / group_size]);
                    }
                    g.accumulate(w, gw);
                  });
}

template <class T>
Var<T> normalize_input(Graph<T>& g, Var<T> x, std::span<const float> mean, std::span<const float> stddev) {
  const auto& X = g.value(x);
  const auto L = channel_layout(X.shape(), "normalize_input");
  if (mean.size() != L.channels || stddev.size() != L.channels) throw ShapeError("normalize_input: channel mismatch");
  std::vector<double> inv(L.channels);
  for (std::size_t c = 0; c < L.channels; ++c) {
    if (!(stddev[c] > 0.0f)) throw ConfigError("normalization std must be positive");
    inv[c] = 1.0 / static_cast<double>(stddev[c]);
  }
  std::vector<double> mu(mean.begin(), mean.end());
  TT<T> y(X.shape());
  for (std::size_t idx = 0; idx < X.size(); ++idx) {
    const std::size_t c = (idx / L.inner) % L.channels;
    y[idx] = static_cast<T>((X[idx] - mu[c]) * inv[c]);
  }
  return g.record("normalize_input", std::move(y), {x}, [x, L, inv](Graph<T>& g, const TT<T>& go) {
    TT<T> gx(go.shape());
    for (std::size_t idx = 0; idx < go.size(); ++idx) gx[idx] = static_cast<T>(go[idx] * inv[(idx / L.inner) % L.channels]);
    g.accumulate(x, gx);
  });
}

template <class T>
Var<T> softmax_cross_entropy(Graph<T>& g, Var<T> logits, std::span<const int> labels) {
  const auto& Z = g.value(logits);
  if (Z.rank() != 2 || Z.dim(0) != labels.size()) {
    throw ShapeError("cross entropy: logits " + to_string(Z.shape()) + " for " + std::to_string(labels.size()) + " labels");
  }
  if (!Z.all_finite()) throw NumericError("cross entropy on non-finite logits");
  const std::size_t N = Z.dim(0), K = Z.dim(1);
  std::vector<double> prob(N * K);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw LabelError("label " + std::to_string(y) + " outside [0," + std::to_string(K) + ")");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(Z[n * K + k]));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(Z[n * K + k] - mx);
    for (std::size_t k = 0; k < K; ++k) prob[n * K + k] = std::exp(Z[n * K + k] - mx) / s;
    total += mx + std::log(s) - Z[n * K + static_cast<std::size_t>(y)];
  }
  std::vector<int> ys(labels.begin(), labels.end());
  TT<T> loss({1}, static_cast<T>(total / static_cast<double>(N)));
  return g.record("softmax_cross_entropy", std::move(loss), {logits},
                  [logits, prob, ys, N, K](Graph<T>& g, const TT<T>& go) {
                    TT<T> gz({N, K});
                    const double s = static_cast<double>(go[0]) / static_cast<double>(N);
                    for (std::size_t n = 0; n < N; ++n)
                      for (std::size_t k = 0; k < K; ++k) {
                        const double onehot = static_cast<std::size_t>(ys[n]) == k ? 1.0 : 0.0;
                        gz[n * K + k] = static_cast<T>((prob[n * K + k] - onehot) * s);
                      }
                    g.accumulate(logits, gz);
                  });
}

template <class T>
Var<T> softmax_kl(Graph<T>& g, Var<T> p_logits, Var<T> q_logits) {
  const auto& P = g.value(p_logits);
  const auto& Q = g.value(q_logits);
  if (P.rank() != 2 || P.shape() != Q.shape()) throw ShapeError("softmax_kl shape mismatch");
  const std::size_t N = P.dim(0), K = P.dim(1);
  auto log_softmax = [K](const TT<T>& Z, std::size_t n, std::vector<double>& out) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(Z[n * K + k]));
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) s += std::exp(Z[n * K + k] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t k = 0; k < K; ++k) out[n * K + k] = Z[n * K + k] - lse;
  };
  std::vector<double> lp(N * K), lq(N * K), row_kl(N);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    log_softmax(P, n, lp);
    log_softmax(Q, n, lq);
    double kl = 0.0;
    for (std::size_t k = 0; k < K; ++k) kl += std::exp(lp[n * K + k]) * (lp[n * K + k] - lq[n * K + k]);
    row_kl[n] = std::max(kl, 0.0);
    total += row_kl[n];
  }
  TT<T> loss({1}, static_cast<T>(total / static_cast<double>(N)));
  return g.record("softmax_kl", std::move(loss), {p_logits, q_logits},
                  [p_logits, q_logits, lp, lq, row_kl, N, K](Graph<T>& g, const TT<T>& go) {
                    const double s = static_cast<double>(go[0]) / static_cast<double>(N);
                    TT<T> gp({N, K}), gq({N, K});
                    for (std::size_t n = 0; n < N; ++n)
                      for (std::size_t k = 0; k < K; ++k) {
                        const std::size_t i = n * K + k;
                        const double p = std::exp(lp[i]), q = std::exp(lq[i]);
                        gp[i] = static_cast<T>(s * p * ((lp[i] - lq[i]) - row_kl[n]));
                        gq[i] = static_cast<T>(s * (q - p));
                      }
                    g.accumulate(p_logits, gp);
                    g.accumulate(q_logits, gq);
                  });
}

#define ARBB_INSTANTIATE_OPS(T)                                                                           \
  template Var<T> linear<T>(Graph<T>&, Var<T>, Var<T>, std::optional<Var<T>>);                            \
  template Var<T> conv2d<T>(Graph<T>&, Var<T>, Var<T>, std::optional<Var<T>>, Conv2dGeometry);            \
  template Var<T> batch_norm<T>(Graph<T>&, Var<T>, Var<T>, Var<T>, BatchNormBuffers&);                    \
  template Var<T> hardtanh<T>(Graph<T>&, Var<T>);                                                         \
  template Var<T> prelu<T>(Graph<T>&, Var<T>, Var<T>);                                                    \
  template Var<T> channel_bias<T>(Graph<T>&, Var<T>, Var<T>, double);                                     \
  template Var<T> channel_scale<T>(Graph<T>&, Var<T>, Var<T>);                                            \
  template Var<T> avg_pool2d<T>(Graph<T>&, Var<T>, std::size_t, std::size_t);                             \
  template Var<T> global_avg_pool<T>(Graph<T>&, Var<T>);                                                  \
  template Var<T> add<T>(Graph<T>&, Var<T>, Var<T>);                                                      \
  template Var<T> scale<T>(Graph<T>&, Var<T>, double);                                                    \
  template Var<T> sign_binarize<T>(Graph<T>&, Var<T>, Surrogate, double);                                 \
  template Var<T> weight_scale_of<T>(Graph<T>&, Var<T>, ScaleRule, double);                               \
  template Var<T> normalize_input<T>(Graph<T>&, Var<T>, std::span<const float>, std::span<const float>); \
  template Var<T> softmax_cross_entropy<T>(Graph<T>&, Var<T>, std::span<const int>);                      \
  template Var<T> softmax_kl<T>(Graph<T>&, Var<T>, Var<T>);

ARBB_INSTANTIATE_OPS(float)
ARBB_INSTANTIATE_OPS(double)

#undef ARBB_INSTANTIATE_OPS

}  // namespace arbb::ops

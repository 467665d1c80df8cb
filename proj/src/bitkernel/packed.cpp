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

#include <bit>
#include <string>

#include "arbb/bitkernel.hpp"
#include "arbb/ops.hpp"

namespace arbb {

namespace {

void check_pm1(float v) {
  if (v != 1.0f && v != -1.0f) throw DomainError("packed operand must be +1 or -1, got " + std::to_string(v));
}

void check_scale(std::span<const float> scale, std::size_t n) {
  if (scale.size() != 1 && scale.size() != n) {
    throw ShapeError("scale has " + std::to_string(scale.size()) + " entries for " + std::to_string(n) + " outputs");
  }
}

}  // namespace

std::uint64_t PackedBits::tail_mask() const noexcept {
  const std::size_t r = logical_len % 64;
  return r == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << r) - 1;
}

PackedBits pack_signs(std::span<const float> values) {
  PackedBits out;
  out.logical_len = values.size();
  out.words.assign(words_for(values.size()), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    check_pm1(values[i]);
    if (values[i] > 0.0f) out.words[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return out;
}

Tensor unpack_signs(const PackedBits& bits) {
  if (bits.logical_len == 0) throw ShapeError("cannot unpack an empty bit vector");
  Tensor out({bits.logical_len});
  for (std::size_t i = 0; i < bits.logical_len; ++i) {
    out[i] = (bits.words[i / 64] >> (i % 64)) & 1 ? 1.0f : -1.0f;
  }
  return out;
}

std::int64_t packed_dot(const PackedBits& a, const PackedBits& w) {
  if (a.logical_len != w.logical_len || a.words.size() != w.words.size()) {
    throw ShapeError("packed_dot length mismatch: " + std::to_string(a.logical_len) + " vs " +
                     std::to_string(w.logical_len));
  }
  if (a.words.empty()) return 0;
  std::int64_t diff = 0;
  const std::size_t last = a.words.size() - 1;
  for (std::size_t k = 0; k < last; ++k) diff += std::popcount(a.words[k] ^ w.words[k]);
  diff += std::popcount((a.words[last] ^ w.words[last]) & a.tail_mask());
  return static_cast<std::int64_t>(a.logical_len) - 2 * diff;
}

PackedMatrix pack_rows(const Tensor& t) {
  if (t.rank() < 2) throw ShapeError("pack_rows expects a matrix, got " + to_string(t.shape()));
  PackedMatrix m;
  m.rows = t.dim(0);
  m.cols = t.size() / m.rows;
  m.stride = words_for(m.cols);
  m.words.assign(m.rows * m.stride, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    std::uint64_t* dst = m.words.data() + r * m.stride;
    const float* src = t.ptr() + r * m.cols;
    for (std::size_t i = 0; i < m.cols; ++i) {
      check_pm1(src[i]);
      if (src[i] > 0.0f) dst[i / 64] |= std::uint64_t{1} << (i % 64);
    }
  }
  return m;
}

Tensor packed_gemm(const PackedMatrix& A, const PackedMatrix& W, std::span<const float> scale) {
  if (A.cols != W.cols) {
    throw ShapeError("packed_gemm inner dimension mismatch: " + std::to_string(A.cols) + " vs " +
                     std::to_string(W.cols));
  }
  check_scale(scale, W.rows);
  Tensor out({A.rows, W.rows});
  const auto n = static_cast<std::int64_t>(A.cols);
  const std::size_t words = A.stride;
  for (std::size_t m = 0; m < A.rows; ++m) {
    const std::uint64_t* a = A.row(m);
    float* dst = out.ptr() + m * W.rows;
    for (std::size_t j = 0; j < W.rows; ++j) {
      const std::uint64_t* w = W.row(j);
      std::int64_t diff = 0;
      for (std::size_t k = 0; k < words; ++k) diff += std::popcount(a[k] ^ w[k]);
      dst[j] = static_cast<float>(n - 2 * diff) * scale[scale.size() == 1 ? 0 : j];
    }
  }
  return out;
}

Tensor sign_gemm_reference(const Tensor& a, const Tensor& w, std::span<const float> scale) {
  if (a.rank() < 2 || w.rank() < 2) throw ShapeError("sign_gemm_reference expects matrices");
  const std::size_t M = a.dim(0), K = a.size() / M, N = w.dim(0);
  if (w.size() / N != K) throw ShapeError("sign_gemm_reference inner dimension mismatch");
  check_scale(scale, N);
  Tensor out({M, N});
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      float s = 0.0f;
      for (std::size_t k = 0; k < K; ++k) s += a[i * K + k] * w[j * K + k];
      out[i * N + j] = s * scale[scale.size() == 1 ? 0 : j];
    }
  }
  return out;
}

Tensor packed_conv2d(const Tensor& a, const PackedMatrix& w, std::size_t kh, std::size_t kw, std::size_t stride,
                     std::size_t pad, std::span<const float> scale) {
  if (a.rank() != 4) throw ShapeError("packed_conv2d expects [N,C,H,W], got " + to_string(a.shape()));
  const std::size_t N = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
  const std::size_t K = C * kh * kw;
  if (w.cols != K) throw ShapeError("packed_conv2d weight rows hold " + std::to_string(w.cols) + " bits, need " +
                                    std::to_string(K));
  check_scale(scale, w.rows);
  const std::size_t Ho = conv_out_size(H, kh, stride, pad), Wo = conv_out_size(W, kw, stride, pad);
  const std::size_t P = Ho * Wo, words = w.stride, O = w.rows;

  // Source offset of each (position, bit), or -1 for a padded tap.
  std::vector<std::ptrdiff_t> src(P * K);
  std::vector<std::uint64_t> valid(P * words, 0);
  std::vector<std::int64_t> valid_count(P, 0);
  for (std::size_t oy = 0; oy < Ho; ++oy) {
    for (std::size_t ox = 0; ox < Wo; ++ox) {
      const std::size_t p = oy * Wo + ox;
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t ky = 0; ky < kh; ++ky) {
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::size_t k = (c * kh + ky) * kw + kx;
            const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(H) &&
                                ix < static_cast<std::ptrdiff_t>(W);
            src[p * K + k] = inside ? static_cast<std::ptrdiff_t>((c * H + iy) * W + ix) : -1;
            if (inside) {
              valid[p * words + k / 64] |= std::uint64_t{1} << (k % 64);
              ++valid_count[p];
            }
          }
        }
      }
    }
  }

  Tensor out({N, O, Ho, Wo});
  std::vector<std::uint64_t> cols(P * words);
  for (std::size_t n = 0; n < N; ++n) {
    const float* img = a.ptr() + n * C * H * W;
    std::fill(cols.begin(), cols.end(), 0);
    for (std::size_t p = 0; p < P; ++p) {
      std::uint64_t* dst = cols.data() + p * words;
      for (std::size_t k = 0; k < K; ++k) {
        const auto off = src[p * K + k];
        if (off < 0) continue;
        const float v = img[off];
        check_pm1(v);
        if (v > 0.0f) dst[k / 64] |= std::uint64_t{1} << (k % 64);
      }
    }
    for (std::size_t o = 0; o < O; ++o) {
      const std::uint64_t* wr = w.row(o);
      const float s = scale[scale.size() == 1 ? 0 : o];
      float* dst = out.ptr() + (n * O + o) * P;
      for (std::size_t p = 0; p < P; ++p) {
        const std::uint64_t* ar = cols.data() + p * words;
        const std::uint64_t* vm = valid.data() + p * words;
        std::int64_t diff = 0;
        for (std::size_t k = 0; k < words; ++k) diff += std::popcount((ar[k] ^ wr[k]) & vm[k]);
        dst[p] = static_cast<float>(valid_count[p] - 2 * diff) * s;
      }
    }
  }
  return out;
}

Tensor packed_conv2d(const Tensor& a, const Tensor& w, std::size_t stride, std::size_t pad,
                     std::span<const float> scale) {
  if (w.rank() != 4) throw ShapeError("packed_conv2d weight must be [O,C,kh,kw], got " + to_string(w.shape()));
  if (a.rank() != 4 || a.dim(1) != w.dim(1)) throw ShapeError("packed_conv2d channel mismatch");
  return packed_conv2d(a, pack_rows(w), w.dim(2), w.dim(3), stride, pad, scale);
}

Tensor conv2d_reference(const Tensor& a, const Tensor& w, std::size_t stride, std::size_t pad,
                        std::span<const float> scale) {
  if (a.rank() != 4 || w.rank() != 4 || a.dim(1) != w.dim(1)) throw ShapeError("conv2d_reference shape mismatch");
  const std::size_t N = a.dim(0), C = a.dim(1), H = a.dim(2), W = a.dim(3);
  const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  check_scale(scale, O);
  const std::size_t Ho = conv_out_size(H, kh, stride, pad), Wo = conv_out_size(W, kw, stride, pad);
  Tensor out({N, O, Ho, Wo});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double s = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
                const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix >= static_cast<std::ptrdiff_t>(W))
                  continue;
                s += static_cast<double>(a[((n * C + c) * H + iy) * W + ix]) * w[((o * C + c) * kh + ky) * kw + kx];
              }
          out[((n * O + o) * Ho + oy) * Wo + ox] = static_cast<float>(s) * scale[scale.size() == 1 ? 0 : o];
        }
  return out;
}

}  // namespace arbb

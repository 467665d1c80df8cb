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

#ifndef ARBB_SRC_DIFFCORE_KERNELS_HPP
#define ARBB_SRC_DIFFCORE_KERNELS_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

// Dense kernels behind conv2d/linear. Each output element accumulates in
// double over its reduction index in ascending order, independent of the
// batch size or the number of output columns, so a row's result does not
// depend on which batch it was computed in.
namespace arbb::kernels {

// C[M,N] += A[M,K] * B[K,N]
template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a_row = A + i * K;
    double* c_row = C + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = a_row[k];
      if (a == 0.0) continue;
      const T* b_row = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c_row[j] += a * static_cast<double>(b_row[j]);
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <class T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, double* C) {
  for (std::size_t i = 0; i < M; ++i) {
    const T* a_row = A + i * K;
    for (std::size_t j = 0; j < N; ++j) {
      const T* b_row = B + j * K;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t k = 0;
      for (; k + 4 <= K; k += 4) {
        s0 += static_cast<double>(a_row[k]) * b_row[k];
        s1 += static_cast<double>(a_row[k + 1]) * b_row[k + 1];
        s2 += static_cast<double>(a_row[k + 2]) * b_row[k + 2];
        s3 += static_cast<double>(a_row[k + 3]) * b_row[k + 3];
      }
      for (; k < K; ++k) s0 += static_cast<double>(a_row[k]) * b_row[k];
      C[i * N + j] += (s0 + s1) + (s2 + s3);
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, double* C) {
  for (std::size_t m = 0; m < M; ++m) {
    const T* a_row = A + m * K;
    const T* b_row = B + m * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = a_row[k];
      if (a == 0.0) continue;
      double* c_row = C + k * N;
      for (std::size_t j = 0; j < N; ++j) c_row[j] += a * static_cast<double>(b_row[j]);
    }
  }
}

struct ConvShape {
  std::size_t channels, height, width;
  std::size_t kh, kw, stride, pad;
  std::size_t out_h, out_w;
  std::size_t rows() const { return channels * kh * kw; }
  std::size_t cols() const { return out_h * out_w; }
};

// image [C,H,W] -> cols [C*kh*kw, Ho*Wo], zero outside the image.
template <class T>
void im2col(const ConvShape& s, const T* image, T* cols) {
  const std::size_t P = s.cols();
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t ky = 0; ky < s.kh; ++ky) {
      for (std::size_t kx = 0; kx < s.kw; ++kx) {
        T* dst = cols + ((c * s.kh + ky) * s.kw + kx) * P;
        for (std::size_t oy = 0; oy < s.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) - static_cast<std::ptrdiff_t>(s.pad);
          for (std::size_t ox = 0; ox < s.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) - static_cast<std::ptrdiff_t>(s.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(s.height) &&
                                ix < static_cast<std::ptrdiff_t>(s.width);
            dst[oy * s.out_w + ox] =
                inside ? image[(c * s.height + static_cast<std::size_t>(iy)) * s.width + static_cast<std::size_t>(ix)]
                       : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add cols into a zeroed double image buffer.
template <class T>
void col2im(const ConvShape& s, const T* cols, double* image) {
  const std::size_t P = s.cols();
  for (std::size_t c = 0; c < s.channels; ++c) {
    for (std::size_t ky = 0; ky < s.kh; ++ky) {
      for (std::size_t kx = 0; kx < s.kw; ++kx) {
        const T* src = cols + ((c * s.kh + ky) * s.kw + kx) * P;
        for (std::size_t oy = 0; oy < s.out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * s.stride + ky) - static_cast<std::ptrdiff_t>(s.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(s.height)) continue;
          for (std::size_t ox = 0; ox < s.out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * s.stride + kx) - static_cast<std::ptrdiff_t>(s.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(s.width)) continue;
            image[(c * s.height + static_cast<std::size_t>(iy)) * s.width + static_cast<std::size_t>(ix)] +=
                src[oy * s.out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace arbb::kernels

#endif  // ARBB_SRC_DIFFCORE_KERNELS_HPP

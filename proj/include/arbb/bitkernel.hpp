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

#ifndef ARBB_BITKERNEL_HPP
#define ARBB_BITKERNEL_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "arbb/tensor.hpp"

namespace arbb {

// Sign vector packed into 64-bit words. Bit i of word k holds element
// 64k+i; bit set means +1. Bits past logical_len are always zero.
struct PackedBits {
  std::size_t logical_len = 0;
  std::vector<std::uint64_t> words;

  std::size_t word_count() const noexcept { return words.size(); }
  // Valid-bit mask of the last word (all ones when logical_len % 64 == 0).
  std::uint64_t tail_mask() const noexcept;
};

inline std::size_t words_for(std::size_t n) { return (n + 63) / 64; }

PackedBits pack_signs(std::span<const float> values);
inline PackedBits pack_signs(const Tensor& t) { return pack_signs(t.data()); }
Tensor unpack_signs(const PackedBits& bits);

// n - 2 * popcount(a ^ w) == sum_i a_i w_i
std::int64_t packed_dot(const PackedBits& a, const PackedBits& w);

// Row-major matrix of packed rows, each row padded to whole words.
struct PackedMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;  // logical bits per row
  std::size_t stride = 0;  // words per row
  std::vector<std::uint64_t> words;

  const std::uint64_t* row(std::size_t r) const { return words.data() + r * stride; }
};

// Packs a [rows, cols] tensor of +-1 values (any trailing shape is
// flattened into cols).
PackedMatrix pack_rows(const Tensor& t);

// out[m, n] = dot(A_m, W_n) * scale[n]; scale has size 1 or W.rows.
// Integer dot products are exact; the scale multiply is one float product.
Tensor packed_gemm(const PackedMatrix& A, const PackedMatrix& W, std::span<const float> scale);

// Float reference for the above: plain triple loop over +-1 values.
Tensor sign_gemm_reference(const Tensor& a, const Tensor& w, std::span<const float> scale);

// a [N,C,H,W] and w [O,C,kh,kw] hold +-1. Padded window positions are
// excluded through per-window valid masks, so the result equals a float
// convolution of the +-1 tensors with zero padding.
Tensor packed_conv2d(const Tensor& a, const Tensor& w, std::size_t stride, std::size_t pad,
                     std::span<const float> scale);

// Same, with the weight already packed as [O, C*kh*kw] rows.
Tensor packed_conv2d(const Tensor& a, const PackedMatrix& w, std::size_t kh, std::size_t kw, std::size_t stride,
                     std::size_t pad, std::span<const float> scale);

// Float reference convolution (zero padding), double accumulation.
Tensor conv2d_reference(const Tensor& a, const Tensor& w, std::size_t stride, std::size_t pad,
                        std::span<const float> scale);

struct BenchRow {
  std::size_t rows = 0;
  std::size_t inner = 0;
  std::size_t cols = 0;
  double float_seconds = 0.0;
  double packed_seconds = 0.0;  // includes packing both operands
  double float_gops = 0.0;
  double packed_gops = 0.0;
  double ratio = 0.0;
  bool exact = false;
};

// Times packed GEMM against a naive float GEMM for each inner dimension on
// rows x inner x cols problems. Each timing is the best of `repeats`.
std::vector<BenchRow> bench_throughput(std::span<const std::size_t> inner_sizes, std::size_t rows = 128,
                                       std::size_t cols = 128, std::size_t repeats = 3, std::uint64_t seed = 0);

}  // namespace arbb

#endif  // ARBB_BITKERNEL_HPP

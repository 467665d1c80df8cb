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

#include <algorithm>
#include <chrono>
#include <limits>

#include "arbb/bitkernel.hpp"
#include "arbb/rng.hpp"

namespace arbb {

namespace {

Tensor random_signs(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = static_cast<float>(rng.sign());
  return t;
}

template <class F>
double best_of(std::size_t repeats, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

}  // namespace

std::vector<BenchRow> bench_throughput(std::span<const std::size_t> inner_sizes, std::size_t rows, std::size_t cols,
                                       std::size_t repeats, std::uint64_t seed) {
  std::vector<BenchRow> out;
  const float one = 1.0f;
  for (std::size_t k : inner_sizes) {
    Rng rng(derive_seed(seed, "bench", k));
    const Tensor a = random_signs(rows, k, rng);
    const Tensor w = random_signs(cols, k, rng);
    Tensor ref, packed;
    BenchRow row;
    row.rows = rows;
    row.inner = k;
    row.cols = cols;
    row.float_seconds = best_of(repeats, [&] { ref = sign_gemm_reference(a, w, {&one, 1}); });
    row.packed_seconds = best_of(repeats, [&] { packed = packed_gemm(pack_rows(a), pack_rows(w), {&one, 1}); });
    const double ops = 2.0 * static_cast<double>(rows) * static_cast<double>(k) * static_cast<double>(cols);
    row.float_gops = ops / row.float_seconds * 1e-9;
    row.packed_gops = ops / row.packed_seconds * 1e-9;
    row.ratio = row.float_seconds / row.packed_seconds;
    row.exact = ref == packed;
    out.push_back(row);
  }
  return out;
}

}  // namespace arbb

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

#ifndef ARBB_SRC_ATTACKS_COMMON_HPP
#define ARBB_SRC_ATTACKS_COMMON_HPP

#include <span>
#include <vector>

#include "arbb/attacks.hpp"

namespace arbb::detail {

inline float sign0(double v) { return v > 0.0 ? 1.0f : (v < 0.0 ? -1.0f : 0.0f); }

inline float clamp01(float v) { return v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v); }

// cur + alpha * sign(dir), projected onto the eps-ball around x0 and the box.
Tensor linf_step(const Tensor& x0, const Tensor& cur, std::span<const double> dir, double alpha, double eps);

void clip_box(Tensor& t);
void project_linf(Tensor& adv, const Tensor& x0, double eps);
void project_l2(Tensor& adv, const Tensor& x0, double eps);

std::vector<double> to_double(const Tensor& t);
double l2_distance(const Tensor& a, const Tensor& b);
double linf_distance(const Tensor& a, const Tensor& b);

AdvResult make_result(const Tensor& x, Tensor adv, bool success, std::size_t queries);
// Min-norm failure: adv is returned for inspection, norms are infinite.
AdvResult failed_min_norm(Tensor adv, std::size_t queries);

// Rejects malformed inputs before any attack starts.
void check_input(const Classifier& clf, const Tensor& x, int y);

}  // namespace arbb::detail

#endif  // ARBB_SRC_ATTACKS_COMMON_HPP

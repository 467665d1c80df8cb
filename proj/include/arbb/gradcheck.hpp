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

#ifndef ARBB_GRADCHECK_HPP
#define ARBB_GRADCHECK_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "arbb/graph.hpp"

namespace arbb {

struct GradcheckOptions {
  double tolerance = 1e-3;
  double step = 1e-4;
  // Coordinates whose one-sided differences disagree by more than this
  // (relative) straddle a kink of a piecewise op and are not scored.
  double kink_threshold = 1e-2;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  bool passed = false;

  std::string summary() const;
};

// |a - n| / max(|a|, |n|, 1e-3 * max_j |n_j|, 1e-10)
double gradcheck_rel_error(double analytic, double numeric, double numeric_scale);

// Checks d(loss)/d(inputs) of build(g, vars) -> scalar Var. The analytic
// gradient comes from a Graph<T>; the finite-difference oracle always runs
// in double with central differences. Both graphs use the surrogate-smoothed
// forward, so sign nodes are checked against their documented stand-in.
template <class T, class Build>
GradcheckReport fd_gradcheck(Build&& build, const std::vector<Tensor64>& inputs, const GradcheckOptions& opt = {}) {
  GradcheckReport rep;
  rep.tolerance = opt.tolerance;

  std::vector<BasicTensor<T>> analytic;
  {
    Graph<T> g(GraphMode::Eval);
    g.set_smooth_surrogate(true);
    std::vector<typename Graph<T>::Var> vars;
    for (const auto& in : inputs) vars.push_back(g.input(in.template cast<T>()));
    auto loss = build(g, std::span<const typename Graph<T>::Var>(vars));
    if (g.value(loss).size() != 1) throw ShapeError("gradcheck expects a scalar loss");
    if (!g.value(loss).all_finite()) throw NumericError("non-finite loss in gradient check");
    g.backward(loss);
    for (auto v : vars) analytic.push_back(g.grad(v));
  }

  auto eval = [&](const std::vector<Tensor64>& xs) {
    Graph<double> g(GraphMode::Eval);
    g.set_smooth_surrogate(true);
    g.set_grad_enabled(false);
    std::vector<Graph<double>::Var> vars;
    for (const auto& in : xs) vars.push_back(g.input(in));
    const double v = g.value(build(g, std::span<const Graph<double>::Var>(vars)))[0];
    if (!std::isfinite(v)) throw NumericError("non-finite loss in gradient check");
    return v;
  };

  std::vector<Tensor64> xs = inputs;
  const double f0 = eval(xs);
  std::vector<std::vector<double>> numeric(inputs.size());
  std::vector<std::vector<char>> kink(inputs.size());
  double scale = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    numeric[k].resize(xs[k].size());
    kink[k].resize(xs[k].size());
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      const double orig = xs[k][i];
      xs[k][i] = orig + opt.step;
      const double fp = eval(xs);
      xs[k][i] = orig - opt.step;
      const double fm = eval(xs);
      xs[k][i] = orig;
      const double right = (fp - f0) / opt.step, left = (f0 - fm) / opt.step;
      numeric[k][i] = (fp - fm) / (2.0 * opt.step);
      const double mag = std::max({std::abs(left), std::abs(right), 1e-6});
      kink[k][i] = std::abs(left - right) > opt.kink_threshold * mag ? 1 : 0;
      if (!kink[k][i]) scale = std::max(scale, std::abs(numeric[k][i]));
    }
  }

  for (std::size_t k = 0; k < xs.size(); ++k) {
    for (std::size_t i = 0; i < xs[k].size(); ++i) {
      if (kink[k][i]) {
        ++rep.skipped_kinks;
        continue;
      }
      ++rep.checked;
      const double err = gradcheck_rel_error(static_cast<double>(analytic[k][i]), numeric[k][i], scale);
      if (rep.checked == 1 || err > rep.max_rel_error) {
        rep.max_rel_error = err;
        rep.worst_input = k;
        rep.worst_index = i;
      }
    }
  }
  // A zero tolerance is never met by a finite-difference estimate.
  rep.passed = opt.tolerance > 0.0 && rep.checked > 0 && rep.max_rel_error <= opt.tolerance;
  return rep;
}

}  // namespace arbb

#endif  // ARBB_GRADCHECK_HPP

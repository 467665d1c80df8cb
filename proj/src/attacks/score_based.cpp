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

#include <cmath>
#include <limits>

#include "attacks/common.hpp"

namespace arbb {

using detail::make_result;

namespace {

double margin_of(const Tensor& z, std::size_t row, int y) {
  const std::size_t K = z.dim(1);
  return logit_margin(std::span<const float>(z.ptr() + row * K, K), y);
}

// Queries x once; returns true when it is already misclassified.
bool initial_check(ScoreOracle& o, const Tensor& x, int y) { return margin_of(o.logits(x), 0, y) < 0.0; }

// Square attack side-length schedule, keyed to progress through the budget.
double p_selection(double p_init, std::size_t it, std::size_t n_iters) {
  const auto i = static_cast<std::size_t>(static_cast<double>(it) / static_cast<double>(n_iters) * 10000.0);
  if (i <= 10) return p_init;
  if (i <= 50) return p_init / 2;
  if (i <= 200) return p_init / 4;
  if (i <= 500) return p_init / 8;
  if (i <= 1000) return p_init / 16;
  if (i <= 2000) return p_init / 32;
  if (i <= 4000) return p_init / 64;
  if (i <= 6000) return p_init / 128;
  if (i <= 8000) return p_init / 256;
  return p_init / 512;
}

}  // namespace

Tensor spsa_gradient(ScoreOracle& oracle, const Tensor& x, int y, std::size_t n, double delta, Rng& rng) {
  const std::size_t D = x.size();
  Shape bs = x.shape();
  bs[0] = 2 * n;
  Tensor batch(bs);
  std::vector<float> v(n * D);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t i = 0; i < D; ++i) {
      const float s = static_cast<float>(rng.sign());
      v[p * D + i] = s;
      batch[(2 * p) * D + i] = static_cast<float>(x[i] + delta * s);
      batch[(2 * p + 1) * D + i] = static_cast<float>(x[i] - delta * s);
    }
  }
  const Tensor z = oracle.logits(batch);
  std::vector<double> g(D, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const double diff = (margin_of(z, 2 * p, y) - margin_of(z, 2 * p + 1, y)) / (2.0 * delta);
    for (std::size_t i = 0; i < D; ++i) g[i] += diff * v[p * D + i];
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < D; ++i) out[i] = static_cast<float>(g[i] / static_cast<double>(n));
  return out;
}

AdvResult spsa(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  detail::check_input(clf, x, y);
  spec.validate();
  if (spec.budget == 0) return make_result(x, x, false, 0);
  const std::size_t n = spec.spsa_samples, per_iter = 2 * n + 1;
  if (spec.budget < 1 + per_iter) {
    throw BudgetError("spsa needs at least " + std::to_string(1 + per_iter) + " queries, budget is " +
                      std::to_string(spec.budget));
  }
  ScoreOracle o(clf, spec.budget);
  if (initial_check(o, x, y)) return make_result(x, x, true, o.used());
  if (spec.epsilon == 0.0) return make_result(x, x, false, o.used());
  const double alpha = spec.alpha();
  Tensor cur = x;
  bool ok = false;
  for (std::size_t it = 0; it < spec.iterations && o.remaining() >= per_iter && !ok; ++it) {
    const Tensor g = spsa_gradient(o, cur, y, n, spec.spsa_delta, rng);
    std::vector<double> dir(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dir[i] = -static_cast<double>(g[i]);
    cur = detail::linf_step(x, cur, dir, alpha, spec.epsilon);
    ok = margin_of(o.logits(cur), 0, y) < 0.0;
  }
  return make_result(x, std::move(cur), ok, o.used());
}

AdvResult nattack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  detail::check_input(clf, x, y);
  spec.validate();
  if (spec.budget == 0) return make_result(x, x, false, 0);
  const std::size_t pop = spec.nattack_population;
  if (spec.budget < 1 + pop) {
    throw BudgetError("nattack needs at least " + std::to_string(1 + pop) + " queries, budget is " +
                      std::to_string(spec.budget));
  }
  ScoreOracle o(clf, spec.budget);
  if (initial_check(o, x, y)) return make_result(x, x, true, o.used());
  if (spec.epsilon == 0.0) return make_result(x, x, false, o.used());

  const std::size_t D = x.size();
  const double eps = spec.epsilon, sigma = spec.nattack_sigma;
  const auto fe = static_cast<float>(eps);
  std::vector<double> w0(D), mu(D);
  for (std::size_t i = 0; i < D; ++i) {
    w0[i] = std::atanh(std::clamp(2.0 * x[i] - 1.0, -1.0 + 1e-6, 1.0 - 1e-6));
    mu[i] = rng.normal(0.0, 0.001);
  }
  Shape bs = x.shape();
  bs[0] = pop;
  Tensor batch(bs);
  std::vector<double> noise(pop * D), loss(pop);
  Tensor last = x;
  for (std::size_t it = 0; it < spec.iterations && o.remaining() >= pop; ++it) {
    for (std::size_t p = 0; p < pop; ++p) {
      for (std::size_t i = 0; i < D; ++i) {
        const double zn = rng.normal();
        noise[p * D + i] = zn;
        const double xi = 0.5 * (std::tanh(w0[i] + mu[i] + sigma * zn) + 1.0);
        const double d = std::clamp(xi - x[i], -eps, eps);
        float v = static_cast<float>(x[i] + d);
        v = std::min(std::max(v, x[i] - fe), x[i] + fe);
        batch[p * D + i] = detail::clamp01(v);
      }
    }
    const Tensor z = o.logits(batch);
    std::size_t best = 0;
    for (std::size_t p = 0; p < pop; ++p) {
      loss[p] = margin_of(z, p, y);
      if (loss[p] < loss[best]) best = p;
    }
    last = slice_rows(batch, best, 1);
    if (loss[best] < 0.0) return make_result(x, std::move(last), true, o.used());
    double mean = 0.0;
    for (double l : loss) mean += l;
    mean /= static_cast<double>(pop);
    double var = 0.0;
    for (double l : loss) var += (l - mean) * (l - mean);
    const double sd = std::sqrt(var / static_cast<double>(pop));
    if (sd < 1e-12) continue;
    const double f = spec.nattack_lr / (static_cast<double>(pop) * sigma);
    for (std::size_t p = 0; p < pop; ++p) {
      const double a = (loss[p] - mean) / sd;
      for (std::size_t i = 0; i < D; ++i) mu[i] -= f * a * noise[p * D + i];
    }
  }
  return make_result(x, std::move(last), false, o.used());
}

AdvResult square_attack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  detail::check_input(clf, x, y);
  spec.validate();
  if (spec.budget == 0) return make_result(x, x, false, 0);
  ScoreOracle o(clf, spec.budget);
  if (initial_check(o, x, y)) return make_result(x, x, true, o.used());
  if (spec.epsilon == 0.0 || o.remaining() == 0) return make_result(x, x, false, o.used());

  const std::size_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto e = static_cast<float>(spec.epsilon);
  Tensor best(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t w = 0; w < W; ++w) {
      const float s = e * static_cast<float>(rng.sign());
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t i = (c * H + h) * W + w;
        best[i] = detail::clamp01(x[i] + s);
      }
    }
  }
  double best_m = margin_of(o.logits(best), 0, y);
  if (best_m < 0.0) return make_result(x, std::move(best), true, o.used());

  const std::size_t side = std::min(H, W);
  for (std::size_t it = 0; it < spec.iterations && o.remaining() > 0; ++it) {
    const double p = p_selection(spec.square_p_init, it, spec.budget);
    auto s = static_cast<std::size_t>(std::lround(std::sqrt(p * static_cast<double>(H * W))));
    s = std::clamp<std::size_t>(s, 1, side);
    const auto r0 = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(H - s)));
    const auto c0 = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(W - s)));
    Tensor cand = best;
    for (int attempt = 0; attempt < 10; ++attempt) {
      bool changed = false;
      for (std::size_t c = 0; c < C; ++c) {
        const float sgn = e * static_cast<float>(rng.sign());
        for (std::size_t h = r0; h < r0 + s; ++h) {
          for (std::size_t w = c0; w < c0 + s; ++w) {
            const std::size_t i = (c * H + h) * W + w;
            cand[i] = detail::clamp01(x[i] + sgn);
            changed = changed || cand[i] != best[i];
          }
        }
      }
      if (changed) break;
    }
    const double m = margin_of(o.logits(cand), 0, y);
    if (m < best_m) {
      best_m = m;
      best = std::move(cand);
      if (best_m < 0.0) break;
    }
  }
  return make_result(x, std::move(best), best_m < 0.0, o.used());
}

}  // namespace arbb

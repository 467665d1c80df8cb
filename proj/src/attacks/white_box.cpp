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

Classifier::LogitSeed ce_seed_for(int y) {
  return [y](const Tensor& z) {
    const int labels[] = {y};
    return cross_entropy_seed(z, labels);
  };
}

bool fooled(const Classifier& clf, const Tensor& adv, int y) { return clf.predict(adv)[0] != y; }

}  // namespace

AdvResult fgsm(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec) {
  detail::check_input(clf, x, y);
  spec.validate();
  const Tensor g = clf.input_gradient(x, ce_seed_for(y));
  Tensor adv = detail::linf_step(x, x, detail::to_double(g), spec.epsilon, spec.epsilon);
  const bool ok = fooled(clf, adv, y);
  return make_result(x, std::move(adv), ok, 1);
}

AdvResult pgd(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  detail::check_input(clf, x, y);
  spec.validate();
  const double eps = spec.epsilon;
  if (eps == 0.0) return make_result(x, x, fooled(clf, x, y), 0);
  const double alpha = spec.alpha();
  Tensor cur = x;
  if (spec.random_start) {
    if (spec.norm == NormKind::Linf) {
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = static_cast<float>(x[i] + rng.uniform(-eps, eps));
      detail::project_linf(cur, x, eps);
    } else {
      std::vector<double> dir(cur.size());
      double n2 = 0.0;
      for (auto& d : dir) {
        d = rng.normal();
        n2 += d * d;
      }
      const double radius = eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(dir.size()));
      const double f = n2 > 0.0 ? radius / std::sqrt(n2) : 0.0;
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = static_cast<float>(x[i] + f * dir[i]);
      detail::project_l2(cur, x, eps);
    }
    detail::clip_box(cur);
  }
  for (std::size_t t = 0; t < spec.iterations; ++t) {
    const Tensor g = clf.input_gradient(cur, ce_seed_for(y));
    if (spec.norm == NormKind::Linf) {
      cur = detail::linf_step(x, cur, detail::to_double(g), alpha, eps);
    } else {
      const double gn = norm_l2(g.data());
      if (gn == 0.0) continue;
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = static_cast<float>(cur[i] + alpha * g[i] / gn);
      detail::project_l2(cur, x, eps);
      detail::clip_box(cur);
    }
  }
  const bool ok = fooled(clf, cur, y);
  return make_result(x, std::move(cur), ok, spec.iterations);
}

AdvResult deepfool(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec) {
  detail::check_input(clf, x, y);
  spec.validate();
  const Tensor z0 = clf.logits(x);
  if (argmax(z0.data()) != y) return make_result(x, x, true, 1);
  const std::size_t K = clf.num_classes(), D = x.size();
  std::vector<double> r_tot(D, 0.0);
  Tensor cur = x;
  std::size_t queries = 1;
  bool flipped = false;
  const double scale = 1.0 + spec.overshoot;
  for (std::size_t it = 0; it < spec.iterations && !flipped; ++it) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> best_w;
    double best_f = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (static_cast<int>(k) == y) continue;
      Tensor zc;
      const Tensor w = clf.input_gradient(
          cur, [&](const Tensor& z) { return difference_seed(z, static_cast<int>(k), y); }, &zc);
      ++queries;
      const double f = static_cast<double>(zc[k]) - zc[static_cast<std::size_t>(y)];
      const double wn = norm_l2(w.data());
      if (wn == 0.0) continue;
      const double dist = std::abs(f) / wn;
      if (dist < best) {
        best = dist;
        best_w = detail::to_double(w);
        best_f = f;
      }
    }
    if (best_w.empty()) break;
    const double wn2 = [&] {
      double s = 0.0;
      for (double v : best_w) s += v * v;
      return s;
    }();
    const double step = (std::abs(best_f) + 1e-4) / wn2;
    for (std::size_t i = 0; i < D; ++i) r_tot[i] += step * best_w[i];
    for (std::size_t i = 0; i < D; ++i) cur[i] = static_cast<float>(x[i] + scale * r_tot[i]);
    const Tensor zc = clf.logits(cur);
    ++queries;
    flipped = argmax(zc.data()) != y;
  }
  Tensor adv = cur;
  detail::clip_box(adv);
  if (!flipped) return detail::failed_min_norm(std::move(adv), queries);
  AdvResult r;
  double l2 = 0.0, linf = 0.0;
  for (double v : r_tot) {
    l2 += (scale * v) * (scale * v);
    linf = std::max(linf, std::abs(scale * v));
  }
  r.adv = std::move(adv);
  r.success = true;
  r.norm_l2 = std::sqrt(l2);
  r.norm_linf = linf;
  r.queries = queries;
  return r;
}

AdvResult cw_l2(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec) {
  detail::check_input(clf, x, y);
  spec.validate();
  const Tensor z0 = clf.logits(x);
  if (argmax(z0.data()) != y) return make_result(x, x, true, 1);
  const std::size_t D = x.size();
  std::vector<double> w0(D);
  for (std::size_t i = 0; i < D; ++i) {
    w0[i] = std::atanh(std::clamp(2.0 * x[i] - 1.0, -1.0 + 1e-6, 1.0 - 1e-6));
  }
  constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  double lo = 0.0, hi = 1e10, c = spec.cw_initial_c;
  double best_l2 = std::numeric_limits<double>::infinity();
  Tensor best_adv;
  std::size_t queries = 1;
  Tensor xa(x.shape());
  std::vector<double> th(D);
  for (std::size_t s = 0; s < spec.cw_search_steps; ++s) {
    std::vector<double> w = w0, m(D, 0.0), v(D, 0.0);
    bool found = false;
    for (std::size_t it = 0; it < spec.iterations; ++it) {
      for (std::size_t i = 0; i < D; ++i) {
        th[i] = std::tanh(w[i]);
        xa[i] = detail::clamp01(static_cast<float>((th[i] + 1.0) * 0.5));
      }
      Tensor zc;
      const Tensor gz = clf.input_gradient(
          xa,
          [&](const Tensor& z) {
            Tensor seed(z.shape());
            std::size_t other = 0;
            float om = -std::numeric_limits<float>::infinity();
            for (std::size_t j = 0; j < z.size(); ++j) {
              if (static_cast<int>(j) != y && z[j] > om) {
                om = z[j];
                other = j;
              }
            }
            if (static_cast<double>(z[static_cast<std::size_t>(y)]) - om > -spec.cw_kappa) {
              seed[static_cast<std::size_t>(y)] = static_cast<float>(c);
              seed[other] = static_cast<float>(-c);
            }
            return seed;
          },
          &zc);
      ++queries;
      if (argmax(zc.data()) != y) {
        found = true;
        const double d = detail::l2_distance(xa, x);
        if (d < best_l2) {
          best_l2 = d;
          best_adv = xa;
        }
      }
      const double t = static_cast<double>(it + 1);
      for (std::size_t i = 0; i < D; ++i) {
        const double gx = 2.0 * (static_cast<double>(xa[i]) - x[i]) + gz[i];
        const double gw = gx * (1.0 - th[i] * th[i]) * 0.5;
        if (!std::isfinite(gw)) throw NumericError("C&W optimizer produced a non-finite gradient");
        m[i] = b1 * m[i] + (1.0 - b1) * gw;
        v[i] = b2 * v[i] + (1.0 - b2) * gw * gw;
        const double mh = m[i] / (1.0 - std::pow(b1, t));
        const double vh = v[i] / (1.0 - std::pow(b2, t));
        w[i] -= spec.cw_lr * mh / (std::sqrt(vh) + adam_eps);
      }
    }
    if (found) {
      hi = std::min(hi, c);
      c = 0.5 * (lo + hi);
    } else {
      lo = std::max(lo, c);
      c = hi < 1e9 ? 0.5 * (lo + hi) : c * 10.0;
    }
  }
  if (best_adv.empty()) return detail::failed_min_norm(x, queries);
  return make_result(x, std::move(best_adv), true, queries);
}

AdvResult si_ni_fgsm(const Classifier& surrogate, const Tensor& x, int y, const AttackSpec& spec) {
  detail::check_input(surrogate, x, y);
  spec.validate();
  const double alpha = spec.alpha(), mu = spec.sini_momentum, eps = spec.epsilon;
  const std::size_t D = x.size();
  std::vector<double> acc(D, 0.0), grad(D);
  Tensor cur = x, nes(x.shape()), scaled(x.shape());
  for (std::size_t t = 0; t < spec.iterations; ++t) {
    for (std::size_t i = 0; i < D; ++i) nes[i] = static_cast<float>(cur[i] + alpha * mu * acc[i]);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t s = 0; s < spec.sini_scales; ++s) {
      const double f = std::ldexp(1.0, -static_cast<int>(s));
      for (std::size_t i = 0; i < D; ++i) scaled[i] = static_cast<float>(nes[i] * f);
      const Tensor g = surrogate.input_gradient(scaled, ce_seed_for(y));
      for (std::size_t i = 0; i < D; ++i) grad[i] += static_cast<double>(g[i]) * f;
    }
    double l1 = 0.0;
    for (auto& gv : grad) {
      gv /= static_cast<double>(spec.sini_scales);
      l1 += std::abs(gv);
    }
    for (std::size_t i = 0; i < D; ++i) acc[i] = mu * acc[i] + (l1 > 0.0 ? grad[i] / l1 : 0.0);
    cur = detail::linf_step(x, cur, acc, alpha, eps);
  }
  const bool ok = fooled(surrogate, cur, y);
  return make_result(x, std::move(cur), ok, spec.iterations * spec.sini_scales);
}

}  // namespace arbb

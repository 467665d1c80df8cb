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
#include <deque>
#include <limits>

#include "attacks/common.hpp"

namespace arbb {

namespace {

// Uniform-noise starting point, then a bisection along the segment to x so
// the walk starts near the boundary.
Tensor find_start(LabelOracle& o, const Tensor& x, int y, std::size_t trials, Rng& rng) {
  Tensor noise(x.shape());
  for (std::size_t t = 0; t < trials; ++t) {
    if (o.remaining() == 0) break;
    for (auto& v : noise.data()) v = static_cast<float>(rng.uniform());
    if (o.label(noise) == y) continue;
    double lo = 0.0, hi = 1.0;
    Tensor blend(x.shape()), best = noise;
    for (int step = 0; step < 10 && o.remaining() > 0; ++step) {
      const double mid = 0.5 * (lo + hi);
      for (std::size_t i = 0; i < x.size(); ++i) {
        blend[i] = detail::clamp01(static_cast<float>((1.0 - mid) * x[i] + mid * noise[i]));
      }
      if (o.label(blend) != y) {
        hi = mid;
        best = blend;
      } else {
        lo = mid;
      }
    }
    return best;
  }
  throw InitError("no adversarial starting point within " + std::to_string(trials) + " trials");
}

struct Window {
  std::deque<bool> hits;
  std::size_t cap;

  void push(bool h) {
    hits.push_back(h);
    if (hits.size() > cap) hits.pop_front();
  }
  bool full() const { return hits.size() == cap; }
  double rate() const {
    if (hits.empty()) return 0.0;
    std::size_t n = 0;
    for (bool h : hits) n += h ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(hits.size());
  }
};

// Common prologue: budget 0, already-misclassified input, start search.
// Returns false when the attack is already decided (result written to out).
bool prologue(LabelOracle& o, const Tensor& x, int y, const AttackSpec& spec, Rng& rng, Tensor& start,
              AdvResult& out) {
  if (spec.budget == 0) {
    out = detail::failed_min_norm(x, 0);
    return false;
  }
  if (o.label(x) != y) {
    out = detail::make_result(x, x, true, o.used());
    return false;
  }
  start = find_start(o, x, y, spec.init_trials, rng);
  return true;
}

}  // namespace

AdvResult boundary_attack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  detail::check_input(clf, x, y);
  spec.validate();
  LabelOracle o(clf, spec.budget);
  Tensor adv;
  AdvResult early;
  if (!prologue(o, x, y, spec, rng, adv, early)) return early;

  const std::size_t D = x.size();
  double d = detail::l2_distance(adv, x);
  double sph = spec.boundary_spherical_step, src = spec.boundary_source_step;
  Window sph_w{{}, 10}, src_w{{}, 10};
  std::vector<double> diff(D), eta(D);
  Tensor sph_cand(x.shape()), cand(x.shape());
  for (std::size_t it = 0; it < spec.iterations && o.remaining() >= 2 && d > 0.0; ++it) {
    double dot = 0.0, en = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      diff[i] = static_cast<double>(x[i]) - adv[i];
      eta[i] = rng.normal();
      dot += eta[i] * diff[i];
    }
    for (std::size_t i = 0; i < D; ++i) {
      eta[i] -= dot / (d * d) * diff[i];
      en += eta[i] * eta[i];
    }
    en = std::sqrt(en);
    if (en == 0.0) continue;
    double vn = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      eta[i] = adv[i] + sph * d * eta[i] / en - x[i];  // offset from x
      vn += eta[i] * eta[i];
    }
    vn = std::sqrt(vn);
    for (std::size_t i = 0; i < D; ++i) {
      const double on_sphere = x[i] + eta[i] * (d / vn);
      sph_cand[i] = detail::clamp01(static_cast<float>(on_sphere));
      cand[i] = detail::clamp01(static_cast<float>(on_sphere + src * (x[i] - on_sphere)));
    }
    const bool sph_ok = o.label(sph_cand) != y;
    sph_w.push(sph_ok);
    if (sph_ok) {
      const bool ok = o.label(cand) != y;
      src_w.push(ok);
      const double nd = detail::l2_distance(cand, x);
      if (ok && nd < d) {
        adv = cand;
        d = nd;
      }
    }
    if (sph_w.full()) {
      const double r = sph_w.rate();
      if (r > 0.5) sph *= 1.5;
      if (r < 0.2) sph /= 1.5;
      sph_w.hits.clear();
    }
    if (src_w.full()) {
      const double r = src_w.rate();
      if (r > 0.5) src = std::min(src * 1.5, 0.5);
      if (r < 0.2) src /= 1.5;
      src_w.hits.clear();
    }
  }
  return detail::make_result(x, std::move(adv), true, o.used());
}

AdvResult evolutionary_attack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  detail::check_input(clf, x, y);
  spec.validate();
  LabelOracle o(clf, spec.budget);
  Tensor adv;
  AdvResult early;
  if (!prologue(o, x, y, spec, rng, adv, early)) return early;

  const std::size_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t rh = spec.evo_reduced_side == 0 ? H : std::min(spec.evo_reduced_side, H);
  const std::size_t rw = spec.evo_reduced_side == 0 ? W : std::min(spec.evo_reduced_side, W);
  const std::size_t Dr = C * rh * rw;
  std::vector<double> cov(Dr, 1.0), path(Dr, 0.0), zr(Dr);
  const double cc = spec.evo_cc, ccov = spec.evo_ccov;
  double mu = spec.evo_mu;
  double d = detail::l2_distance(adv, x);
  Window win{{}, 20};
  Tensor cand(x.shape());
  std::vector<double> up(x.size());
  for (std::size_t it = 0; it < spec.iterations && o.remaining() >= 1 && d > 0.0; ++it) {
    for (std::size_t j = 0; j < Dr; ++j) zr[j] = rng.normal() * std::sqrt(cov[j]);
    double un = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t sh = h * rh / H;
        for (std::size_t w = 0; w < W; ++w) {
          const std::size_t i = (c * H + h) * W + w;
          up[i] = zr[(c * rh + sh) * rw + w * rw / W];
          un += up[i] * up[i];
        }
      }
    }
    if (un == 0.0) continue;
    const double f = spec.evo_sigma * d / std::sqrt(un);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = adv[i] + mu * (static_cast<double>(x[i]) - adv[i]) + f * up[i];
      cand[i] = detail::clamp01(static_cast<float>(v));
    }
    const bool ok = o.label(cand) != y;
    const double nd = detail::l2_distance(cand, x);
    const bool better = ok && nd < d;
    win.push(better);
    if (better) {
      adv = cand;
      d = nd;
      const double k = std::sqrt(cc * (2.0 - cc));
      for (std::size_t j = 0; j < Dr; ++j) {
        path[j] = (1.0 - cc) * path[j] + k * zr[j];
        cov[j] = (1.0 - ccov) * cov[j] + ccov * path[j] * path[j];
      }
    }
    mu = std::clamp(mu * std::exp(win.rate() - 0.2), 1e-6, 0.5);
  }
  return detail::make_result(x, std::move(adv), true, o.used());
}

}  // namespace arbb

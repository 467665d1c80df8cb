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

#include "attacks/common.hpp"

#include <algorithm>
#include <cmath>

#include "arbb/graph.hpp"

namespace arbb {

std::vector<int> Classifier::predict(const Tensor& x) const {
  const Tensor z = logits(x);
  const std::size_t N = z.dim(0), K = z.dim(1);
  std::vector<int> out(N);
  for (std::size_t n = 0; n < N; ++n) out[n] = argmax(std::span<const float>(z.ptr() + n * K, K));
  return out;
}

Tensor ModelClassifier::input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out) const {
  Graph<float> g(GraphMode::Eval);
  g.set_parameter_grads(false);
  auto xv = g.input(x);
  auto z = model_.forward(g, xv, check_);
  const Tensor& zv = g.value(z);
  if (logits_out) *logits_out = zv;
  Tensor s = seed(zv);
  if (s.shape() != zv.shape()) throw ShapeError("logit seed shape " + to_string(s.shape()) + " for logits " +
                                                to_string(zv.shape()));
  g.backward(z, s);
  return g.grad(xv);
}

AffineClassifier::AffineClassifier(Shape input_shape, Tensor weight, Tensor bias)
    : shape_(std::move(input_shape)), weight_(std::move(weight)), bias_(std::move(bias)) {
  if (weight_.rank() != 2 || weight_.dim(1) != numel(shape_)) {
    throw ShapeError("affine weight " + to_string(weight_.shape()) + " does not match input " + to_string(shape_));
  }
  if (bias_.size() != weight_.dim(0)) throw ShapeError("affine bias size differs from class count");
}

Tensor AffineClassifier::logits(const Tensor& x) const {
  const std::size_t D = weight_.dim(1), K = weight_.dim(0);
  if (x.size() % D != 0 || x.rank() == 0 || x.size() / x.dim(0) != D) {
    throw ShapeError("affine classifier input " + to_string(x.shape()));
  }
  const std::size_t N = x.dim(0);
  Tensor out({N, K});
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      double s = bias_[k];
      for (std::size_t d = 0; d < D; ++d) s += static_cast<double>(weight_[k * D + d]) * x[n * D + d];
      out[n * K + k] = static_cast<float>(s);
    }
  }
  return out;
}

Tensor AffineClassifier::input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out) const {
  const Tensor z = logits(x);
  if (logits_out) *logits_out = z;
  const Tensor s = seed(z);
  if (s.shape() != z.shape()) throw ShapeError("logit seed shape mismatch");
  const std::size_t D = weight_.dim(1), K = weight_.dim(0), N = x.dim(0);
  Tensor g(x.shape());
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t d = 0; d < D; ++d) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += static_cast<double>(s[n * K + k]) * weight_[k * D + d];
      g[n * D + d] = static_cast<float>(acc);
    }
  }
  return g;
}

int argmax(std::span<const float> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

double logit_margin(std::span<const float> z, int y) {
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (static_cast<int>(j) != y) other = std::max(other, static_cast<double>(z[j]));
  }
  return static_cast<double>(z[static_cast<std::size_t>(y)]) - other;
}

Tensor cross_entropy_seed(const Tensor& logits, std::span<const int> labels) {
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  if (labels.size() != N) throw LabelError("label count differs from batch size");
  Tensor s(logits.shape());
  for (std::size_t n = 0; n < N; ++n) {
    const float* z = logits.ptr() + n * K;
    const double m = *std::max_element(z, z + K);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(z[k] - m);
    for (std::size_t k = 0; k < K; ++k) {
      const double p = std::exp(z[k] - m) / sum;
      s[n * K + k] = static_cast<float>(p - (static_cast<int>(k) == labels[n] ? 1.0 : 0.0));
    }
  }
  return s;
}

Tensor difference_seed(const Tensor& logits, int a, int b) {
  Tensor s(logits.shape());
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  for (std::size_t n = 0; n < N; ++n) {
    s[n * K + static_cast<std::size_t>(a)] += 1.0f;
    s[n * K + static_cast<std::size_t>(b)] -= 1.0f;
  }
  return s;
}

Tensor ScoreOracle::logits(const Tensor& batch) {
  const std::size_t n = batch.dim(0);
  if (n > remaining()) throw BudgetError("score oracle query would exceed the budget of " + std::to_string(budget_));
  used_ += n;
  return clf_.logits(batch);
}

int LabelOracle::label(const Tensor& x) {
  if (remaining() == 0) throw BudgetError("label oracle query would exceed the budget of " + std::to_string(budget_));
  ++used_;
  const Tensor z = clf_.logits(x);
  return argmax(z.data());
}

std::string_view attack_name(AttackId id) {
  switch (id) {
    case AttackId::FGSM:
      return "fgsm";
    case AttackId::PGD:
      return "pgd";
    case AttackId::DeepFool:
      return "deepfool";
    case AttackId::CW:
      return "cw";
    case AttackId::SPSA:
      return "spsa";
    case AttackId::NAttack:
      return "nattack";
    case AttackId::Square:
      return "square";
    case AttackId::Boundary:
      return "boundary";
    case AttackId::Evolutionary:
      return "evolutionary";
    case AttackId::SINIFGSM:
      return "si-ni-fgsm";
  }
  return "?";
}

AttackId parse_attack(std::string_view name) {
  for (auto id : kAllAttacks) {
    if (attack_name(id) == name) return id;
  }
  throw ConfigError("unknown attack '" + std::string(name) + "'");
}

std::string_view family_name(AttackFamily f) {
  switch (f) {
    case AttackFamily::WhiteBox:
      return "white-box";
    case AttackFamily::ScoreBased:
      return "score-based";
    case AttackFamily::DecisionBased:
      return "decision-based";
    case AttackFamily::Transfer:
      return "transfer";
  }
  return "?";
}

AttackFamily attack_family(AttackId id) {
  switch (id) {
    case AttackId::FGSM:
    case AttackId::PGD:
    case AttackId::DeepFool:
    case AttackId::CW:
      return AttackFamily::WhiteBox;
    case AttackId::SPSA:
    case AttackId::NAttack:
    case AttackId::Square:
      return AttackFamily::ScoreBased;
    case AttackId::Boundary:
    case AttackId::Evolutionary:
      return AttackFamily::DecisionBased;
    case AttackId::SINIFGSM:
      return AttackFamily::Transfer;
  }
  return AttackFamily::WhiteBox;
}

std::string_view norm_name(NormKind n) { return n == NormKind::Linf ? "linf" : "l2"; }

NormKind parse_norm(std::string_view name) {
  if (name == "linf" || name == "inf") return NormKind::Linf;
  if (name == "l2" || name == "2") return NormKind::L2;
  throw ConfigError("unknown norm '" + std::string(name) + "'");
}

bool is_min_norm(AttackId id) {
  return id == AttackId::DeepFool || id == AttackId::CW || id == AttackId::Boundary || id == AttackId::Evolutionary;
}

AttackSpec AttackSpec::defaults(AttackId id, NormKind norm) {
  AttackSpec s;
  s.method = id;
  s.norm = norm;
  s.epsilon = norm == NormKind::Linf ? 0.03 : 0.5;
  switch (id) {
    case AttackId::FGSM:
      s.iterations = 1;
      break;
    case AttackId::PGD:
      s.iterations = 20;
      break;
    case AttackId::DeepFool:
      s.iterations = 50;
      break;
    case AttackId::CW:
      s.iterations = 200;
      break;
    case AttackId::SPSA:
    case AttackId::NAttack:
      s.iterations = 10000;
      s.budget = 10000;
      break;
    case AttackId::Square:
      s.iterations = 5000;
      s.budget = 5000;
      break;
    case AttackId::Boundary:
    case AttackId::Evolutionary:
      s.iterations = 10000;
      s.budget = 10000;
      break;
    case AttackId::SINIFGSM:
      s.iterations = 10;
      break;
  }
  return s;
}

double AttackSpec::alpha() const {
  if (step_size) return *step_size;
  const double T = static_cast<double>(std::max<std::size_t>(iterations, 1));
  switch (method) {
    case AttackId::PGD:
      return 2.5 * epsilon / T;
    case AttackId::SINIFGSM:
      return epsilon / T;
    case AttackId::SPSA:
      return epsilon / 4.0;
    default:
      return epsilon;
  }
}

void AttackSpec::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError("epsilon must be finite and non-negative");
  if (step_size && (!std::isfinite(*step_size) || *step_size < 0.0)) {
    throw ConfigError("step size must be finite and non-negative");
  }
  const bool linf_only = method == AttackId::FGSM || method == AttackId::Square || method == AttackId::SINIFGSM ||
                         method == AttackId::SPSA || method == AttackId::NAttack;
  if (linf_only && norm != NormKind::Linf) {
    throw ConfigError(std::string(attack_name(method)) + " supports the linf norm only");
  }
  if (method == AttackId::SINIFGSM && sini_scales == 0) throw ConfigError("si-ni-fgsm needs at least one scale copy");
  if (spsa_samples == 0) throw ConfigError("spsa needs at least one sample pair");
  if (!(spsa_delta > 0.0)) throw ConfigError("spsa delta must be positive");
  if (nattack_population == 0) throw ConfigError("nattack population must be positive");
  if (!(nattack_sigma > 0.0)) throw ConfigError("nattack sigma must be positive");
  if (!(nattack_lr >= 0.0)) throw ConfigError("nattack learning rate must be non-negative");
  if (!(square_p_init > 0.0 && square_p_init <= 1.0)) throw ConfigError("square p_init must be in (0, 1]");
  if (!(cw_initial_c > 0.0) || !(cw_lr > 0.0) || cw_kappa < 0.0) throw ConfigError("invalid C&W constants");
  if (!(overshoot >= 0.0)) throw ConfigError("overshoot must be non-negative");
  if (!(boundary_spherical_step > 0.0) || !(boundary_source_step > 0.0)) {
    throw ConfigError("boundary step sizes must be positive");
  }
  if (!(evo_ccov >= 0.0 && evo_ccov < 1.0) || !(evo_cc > 0.0 && evo_cc < 1.0) || !(evo_mu > 0.0) ||
      !(evo_sigma > 0.0)) {
    throw ConfigError("invalid evolutionary constants");
  }
}

std::vector<double> min_norm_to_curve(std::span<const AdvResult> results, NormKind norm,
                                      std::span<const double> eps_grid) {
  if (results.empty()) throw MetricError("min_norm_to_curve over zero results");
  std::vector<double> out;
  out.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    std::size_t robust = 0;
    for (const auto& r : results) robust += (!r.success || r.norm(norm) > eps) ? 1 : 0;
    out.push_back(static_cast<double>(robust) / static_cast<double>(results.size()));
  }
  return out;
}

namespace detail {

Tensor linf_step(const Tensor& x0, const Tensor& cur, std::span<const double> dir, double alpha, double eps) {
  Tensor out(cur.shape());
  const auto a = static_cast<float>(alpha);
  const auto e = static_cast<float>(eps);
  for (std::size_t i = 0; i < out.size(); ++i) {
    float v = cur[i] + a * sign0(dir[i]);
    v = std::min(std::max(v, x0[i] - e), x0[i] + e);
    out[i] = clamp01(v);
  }
  return out;
}

void clip_box(Tensor& t) {
  for (auto& v : t.data()) v = clamp01(v);
}

void project_linf(Tensor& adv, const Tensor& x0, double eps) {
  const auto e = static_cast<float>(eps);
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = std::min(std::max(adv[i], x0[i] - e), x0[i] + e);
}

void project_l2(Tensor& adv, const Tensor& x0, double eps) {
  const double d = l2_distance(adv, x0);
  if (d <= eps || d == 0.0) return;
  // Shrink slightly below eps so float rounding cannot push it outside.
  const double f = eps / d * (1.0 - 1e-7);
  for (std::size_t i = 0; i < adv.size(); ++i) {
    adv[i] = static_cast<float>(x0[i] + f * (static_cast<double>(adv[i]) - x0[i]));
  }
}

std::vector<double> to_double(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double l2_distance(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double linf_distance(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

AdvResult make_result(const Tensor& x, Tensor adv, bool success, std::size_t queries) {
  AdvResult r;
  r.norm_l2 = l2_distance(adv, x);
  r.norm_linf = linf_distance(adv, x);
  r.adv = std::move(adv);
  r.success = success;
  r.queries = queries;
  return r;
}

AdvResult failed_min_norm(Tensor adv, std::size_t queries) {
  AdvResult r;
  r.adv = std::move(adv);
  r.success = false;
  r.norm_l2 = r.norm_linf = std::numeric_limits<double>::infinity();
  r.queries = queries;
  return r;
}

void check_input(const Classifier& clf, const Tensor& x, int y) {
  if (x.rank() != 4 || x.dim(0) != 1) throw ShapeError("attacks take one image as [1,C,H,W], got " +
                                                       to_string(x.shape()));
  if (y < 0 || static_cast<std::size_t>(y) >= clf.num_classes()) {
    throw LabelError("label " + std::to_string(y) + " outside [0, " + std::to_string(clf.num_classes()) + ")");
  }
  for (float v : x.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DomainError("attack input outside the [0,1] box");
  }
}

}  // namespace detail

}  // namespace arbb

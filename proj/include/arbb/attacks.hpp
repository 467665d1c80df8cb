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

#ifndef ARBB_ATTACKS_HPP
#define ARBB_ATTACKS_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arbb/model.hpp"
#include "arbb/rng.hpp"
#include "arbb/tensor.hpp"

namespace arbb {

// Anything an attack can query. Inputs are batches [N, C, H, W] in [0,1].
class Classifier {
 public:
  // Maps logits [N,K] to d(loss)/d(logits) [N,K].
  using LogitSeed = std::function<Tensor(const Tensor& logits)>;

  virtual ~Classifier() = default;
  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Tensor logits(const Tensor& x) const = 0;
  // Gradient of sum(seed(logits) * logits) with respect to x. The logits at
  // x are written to *logits_out when given.
  virtual Tensor input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out = nullptr) const = 0;

  std::vector<int> predict(const Tensor& x) const;
};

class ModelClassifier final : public Classifier {
 public:
  explicit ModelClassifier(const Model& model, InputCheck check = InputCheck::Exact) : model_(model), check_(check) {}
  Shape input_shape() const override { return model_.input_shape(); }
  std::size_t num_classes() const override { return model_.num_classes(); }
  Tensor logits(const Tensor& x) const override { return model_.logits(x, check_); }
  Tensor input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out = nullptr) const override;
  const Model& model() const { return model_; }

 private:
  const Model& model_;
  InputCheck check_;
};

// logits = W * flatten(x) + b. Used for closed-form oracles.
class AffineClassifier final : public Classifier {
 public:
  AffineClassifier(Shape input_shape, Tensor weight, Tensor bias);
  Shape input_shape() const override { return shape_; }
  std::size_t num_classes() const override { return weight_.dim(0); }
  Tensor logits(const Tensor& x) const override;
  Tensor input_gradient(const Tensor& x, const LogitSeed& seed, Tensor* logits_out = nullptr) const override;

 private:
  Shape shape_;
  Tensor weight_;  // [K, D]
  Tensor bias_;    // [K]
};

// Logit seeds for the losses used by the attacks.
Tensor cross_entropy_seed(const Tensor& logits, std::span<const int> labels);
// d/dz of (z_a - z_b) per row.
Tensor difference_seed(const Tensor& logits, int a, int b);
// z_y - max_{j != y} z_j
double logit_margin(std::span<const float> logits, int y);
int argmax(std::span<const float> row);

// Score access with query accounting. One query per image evaluated.
class ScoreOracle {
 public:
  ScoreOracle(const Classifier& clf, std::size_t budget) : clf_(clf), budget_(budget) {}
  Tensor logits(const Tensor& batch);
  std::size_t used() const noexcept { return used_; }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t remaining() const noexcept { return budget_ - used_; }

 private:
  const Classifier& clf_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

// Hard-label access with query accounting.
class LabelOracle {
 public:
  LabelOracle(const Classifier& clf, std::size_t budget) : clf_(clf), budget_(budget) {}
  int label(const Tensor& x);
  std::size_t used() const noexcept { return used_; }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t remaining() const noexcept { return budget_ - used_; }

 private:
  const Classifier& clf_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

enum class AttackId { FGSM, PGD, DeepFool, CW, SPSA, NAttack, Square, Boundary, Evolutionary, SINIFGSM };
enum class AttackFamily { WhiteBox, ScoreBased, DecisionBased, Transfer };
enum class NormKind { Linf, L2 };

inline constexpr AttackId kAllAttacks[] = {AttackId::FGSM,   AttackId::PGD,    AttackId::DeepFool, AttackId::CW,
                                           AttackId::SPSA,   AttackId::NAttack, AttackId::Square,  AttackId::Boundary,
                                           AttackId::Evolutionary, AttackId::SINIFGSM};

std::string_view attack_name(AttackId id);
AttackId parse_attack(std::string_view name);
std::string_view family_name(AttackFamily f);
AttackFamily attack_family(AttackId id);
std::string_view norm_name(NormKind n);
NormKind parse_norm(std::string_view name);
// Attacks returning an unconstrained minimal perturbation; budget curves
// come from min_norm_to_curve.
bool is_min_norm(AttackId id);

struct AttackSpec {
  AttackId method = AttackId::PGD;
  NormKind norm = NormKind::Linf;
  double epsilon = 0.03;
  std::size_t iterations = 20;
  std::size_t budget = 0;             // query budget of black-box attacks
  std::optional<double> step_size;    // method default when unset
  std::uint64_t seed = 0;

  bool random_start = true;           // pgd
  double overshoot = 0.02;            // deepfool
  std::size_t cw_search_steps = 6;
  double cw_initial_c = 1e-2;
  double cw_lr = 0.01;
  double cw_kappa = 0.0;
  std::size_t spsa_samples = 32;      // perturbation pairs per iteration
  double spsa_delta = 0.01;
  std::size_t nattack_population = 50;
  double nattack_sigma = 0.1;
  double nattack_lr = 0.02;
  double square_p_init = 0.05;
  std::size_t init_trials = 100;      // boundary / evolutionary start search
  double boundary_spherical_step = 0.01;
  double boundary_source_step = 0.01;
  std::size_t evo_reduced_side = 0;   // 0 = full resolution
  double evo_ccov = 0.001;
  double evo_cc = 0.01;
  double evo_mu = 0.01;
  double evo_sigma = 0.02;           // sample norm relative to the current distance
  std::size_t sini_scales = 5;
  double sini_momentum = 1.0;

  // Published per-method budgets plus common defaults for the remaining constants.
  static AttackSpec defaults(AttackId id, NormKind norm = NormKind::Linf);
  double alpha() const;
  void validate() const;
};

struct AdvResult {
  Tensor adv;  // [1, C, H, W], always inside [0,1]
  bool success = false;
  // Norms of the reported perturbation. Min-norm attacks that fail report
  // infinity.
  double norm_l2 = 0.0;
  double norm_linf = 0.0;
  std::size_t queries = 0;
  bool init_failed = false;

  double norm(NormKind n) const { return n == NormKind::Linf ? norm_linf : norm_l2; }
};

// Single-image attacks. x is [1, C, H, W], y its true label.
AdvResult fgsm(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec);
AdvResult pgd(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);
AdvResult deepfool(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec);
AdvResult cw_l2(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec);
AdvResult spsa(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);
AdvResult nattack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);
AdvResult square_attack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);
AdvResult boundary_attack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);
AdvResult evolutionary_attack(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);
AdvResult si_ni_fgsm(const Classifier& surrogate, const Tensor& x, int y, const AttackSpec& spec);

// SPSA estimate of the gradient of the logit margin, n Rademacher pairs.
Tensor spsa_gradient(ScoreOracle& oracle, const Tensor& x, int y, std::size_t n, double delta, Rng& rng);

// Dispatch on spec.method.
AdvResult run_single(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng);

// Attacks every image; image i uses Rng(derive_seed(spec.seed, "image", i)).
// Decision-based start failures are recorded as init_failed.
std::vector<AdvResult> run_attack(const Classifier& clf, const Tensor& images, std::span<const int> labels,
                                  const AttackSpec& spec, std::size_t workers = 1);

// Accuracy at each budget: an image counts as robust when its attack failed
// or its achieved norm exceeds eps.
std::vector<double> min_norm_to_curve(std::span<const AdvResult> results, NormKind norm,
                                      std::span<const double> eps_grid);

}  // namespace arbb

#endif  // ARBB_ATTACKS_HPP

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
#include <cmath>
#include <limits>

#include "doctest.h"
#include "support/support.hpp"

using namespace arbb;

namespace {

// Two-class affine toy on a 2-pixel image: logit0 = w.x + b, logit1 = 0.
AffineClassifier binary_toy(float w0, float w1, float b) {
  return AffineClassifier({1, 1, 1, 2}, Tensor({2, 2}, std::vector<float>{w0, w1, 0, 0}),
                          Tensor({2}, std::vector<float>{b, 0}));
}

Tensor point(float a, float b) { return Tensor({1, 1, 1, 2}, std::vector<float>{a, b}); }

AffineClassifier random_affine(Rng& rng, std::size_t K = 3) {
  return AffineClassifier({1, 3, 4, 4}, test::random_tensor({K, 48}, rng), test::random_tensor({K}, rng, -0.1, 0.1));
}

// Central differences of the cross-entropy loss of clf at (x, y).
std::vector<double> fd_ce_gradient(const Classifier& clf, const Tensor& x, int y) {
  const std::vector<int> labels{y};
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor a = x, b = x;
    a[i] += 1e-2f;
    b[i] -= 1e-2f;
    const double la = cross_entropy_value(clf.logits(a), labels), lb = cross_entropy_value(clf.logits(b), labels);
    g[i] = (la - lb) / (static_cast<double>(a[i]) - b[i]);
  }
  return g;
}

AttackSpec small_spec(AttackId id, NormKind norm = NormKind::Linf) {
  AttackSpec s = AttackSpec::defaults(id, norm);
  s.seed = 5;
  switch (id) {
    case AttackId::SPSA:
      s.budget = 300;
      s.spsa_samples = 8;
      break;
    case AttackId::NAttack:
      s.budget = 300;
      s.nattack_population = 20;
      break;
    case AttackId::Square:
      s.budget = 300;
      break;
    case AttackId::Boundary:
    case AttackId::Evolutionary:
      s.budget = 300;
      break;
    case AttackId::CW:
      s.iterations = 40;
      s.cw_search_steps = 3;
      break;
    case AttackId::DeepFool:
    case AttackId::PGD:
      s.iterations = 10;
      break;
    default:
      break;
  }
  s.iterations = std::min<std::size_t>(s.iterations, std::max<std::size_t>(s.budget, 50));
  return s;
}

double accuracy(std::span<const AdvResult> r) {
  std::size_t robust = 0;
  for (const auto& a : r) robust += a.success ? 0 : 1;
  return static_cast<double>(robust) / static_cast<double>(r.size());
}

}  // namespace

TEST_CASE("epsilon zero returns the input") {
  Rng rng(1);
  const AffineClassifier clf = random_affine(rng);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0, 1);
  const int y = clf.predict(x)[0];
  for (AttackId id : {AttackId::FGSM, AttackId::PGD, AttackId::SINIFGSM, AttackId::SPSA, AttackId::NAttack,
                      AttackId::Square}) {
    CAPTURE(attack_name(id));
    AttackSpec s = small_spec(id);
    s.epsilon = 0.0;
    Rng r(2);
    const AdvResult a = run_single(clf, x, y, s, r);
    CHECK(a.adv == x);
    CHECK_FALSE(a.success);
  }
}

TEST_CASE("fgsm follows the sign of the oracle gradient") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const AffineClassifier clf = random_affine(rng);
    const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0.2, 0.8);
    const int y = static_cast<int>(rng.integer(0, 2));
    AttackSpec s = AttackSpec::defaults(AttackId::FGSM);
    s.epsilon = 0.05;
    const AdvResult a = fgsm(clf, x, y, s);
    const auto g = fd_ce_gradient(clf, x, y);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (std::abs(g[i]) < 1e-4) continue;
      const double expect = x[i] + (g[i] > 0 ? 0.05 : -0.05);
      CHECK(a.adv[i] == doctest::Approx(expect).epsilon(1e-6));
    }
  }
}

TEST_CASE("deepfool on a linear binary classifier") {
  AttackSpec s = AttackSpec::defaults(AttackId::DeepFool, NormKind::L2);
  s.overshoot = 0.0;
  SUBCASE("closed form, unconstrained by the box") {
    const auto clf = binary_toy(3, 4, 0);
    const AdvResult a = deepfool(clf, point(1, 1), 0, s);
    REQUIRE(a.success);
    CHECK(std::abs(a.norm_l2 - 1.4) < 1e-4);
    // One linearization, one gradient and one verification query.
    CHECK(a.queries == 3);
    CHECK(test::in_box(a.adv));
  }
  SUBCASE("interior case") {
    const auto clf = binary_toy(3, 4, -3);
    const AdvResult a = deepfool(clf, point(0.5f, 0.5f), 0, s);
    REQUIRE(a.success);
    CHECK(std::abs(a.norm_l2 - 0.1) < 1e-4);
    // Direction is -w/|w|.
    CHECK((a.adv[0] - 0.5f) / -0.6f == doctest::Approx(0.1).epsilon(1e-3));
    CHECK((a.adv[1] - 0.5f) / -0.8f == doctest::Approx(0.1).epsilon(1e-3));
  }
  SUBCASE("already misclassified") {
    const auto clf = binary_toy(3, 4, -3);
    const AdvResult a = deepfool(clf, point(0.1f, 0.1f), 0, s);
    CHECK(a.success);
    CHECK(a.norm_l2 == 0.0);
    CHECK(a.adv == point(0.1f, 0.1f));
  }
  SUBCASE("no flip within the cap") {
    const AffineClassifier constant({1, 1, 1, 2}, Tensor({2, 2}), Tensor({2}, std::vector<float>{1, 0}));
    const AdvResult a = deepfool(constant, point(0.5f, 0.5f), 0, s);
    CHECK_FALSE(a.success);
    CHECK(std::isinf(a.norm_l2));
  }
}

TEST_CASE("C&W lands within 10% of the closed form") {
  const auto clf = binary_toy(3, 4, -3);
  const AttackSpec s = AttackSpec::defaults(AttackId::CW, NormKind::L2);
  const AdvResult a = cw_l2(clf, point(0.5f, 0.5f), 0, s);
  REQUIRE(a.success);
  CHECK(a.norm_l2 >= 0.1 - 1e-4);
  CHECK(a.norm_l2 <= 0.11);
  CHECK(test::in_box(a.adv, 0.0));
  const AdvResult mis = cw_l2(clf, point(0.1f, 0.1f), 0, s);
  CHECK(mis.success);
  CHECK(mis.norm_l2 == 0.0);
}

TEST_CASE("spsa gradient estimate aligns with the true gradient") {
  Rng rng(7);
  const AffineClassifier clf = random_affine(rng, 4);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0.3, 0.7);
  const Tensor z = clf.logits(x);
  const int y = 0;
  int runner = -1;
  for (int k = 1; k < 4; ++k) {
    if (runner < 0 || z[static_cast<std::size_t>(k)] > z[static_cast<std::size_t>(runner)]) runner = k;
  }
  // d margin / dx = W[y] - W[runner]; recovered here by finite differences of the logits.
  std::vector<double> truth(48);
  for (std::size_t i = 0; i < 48; ++i) {
    Tensor a = x;
    a[i] += 0.01f;
    const Tensor za = clf.logits(a);
    truth[i] = ((za[0] - za[static_cast<std::size_t>(runner)]) - (z[0] - z[static_cast<std::size_t>(runner)])) /
               (static_cast<double>(a[i]) - x[i]);
  }
  ScoreOracle o(clf, 2000);
  const Tensor est = spsa_gradient(o, x, y, 1000, 0.001, rng);
  CHECK(o.used() == 2000);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < 48; ++i) {
    dot += est[i] * truth[i];
    na += static_cast<double>(est[i]) * est[i];
    nb += truth[i] * truth[i];
  }
  CHECK(dot / std::sqrt(na * nb) > 0.5);
  CHECK_THROWS_AS(o.logits(x), BudgetError);
}

TEST_CASE("score-based budget rules") {
  Rng rng(8);
  const AffineClassifier clf = random_affine(rng);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0, 1);
  const int y = clf.predict(x)[0];
  for (AttackId id : {AttackId::SPSA, AttackId::NAttack, AttackId::Square}) {
    AttackSpec s = small_spec(id);
    s.budget = 0;
    Rng r(1);
    const AdvResult a = run_single(clf, x, y, s, r);
    CHECK(a.adv == x);
    CHECK(a.queries == 0);
  }
  AttackSpec s = small_spec(AttackId::SPSA);
  s.budget = 2 * s.spsa_samples;
  CHECK_THROWS_AS(spsa(clf, x, y, s, rng), BudgetError);
  s = small_spec(AttackId::NAttack);
  s.budget = s.nattack_population;
  CHECK_THROWS_AS(nattack(clf, x, y, s, rng), BudgetError);
  CHECK(AttackSpec::defaults(AttackId::SPSA).budget == 10000);
  CHECK(AttackSpec::defaults(AttackId::Square).budget == 5000);
  CHECK(AttackSpec::defaults(AttackId::Boundary).budget == 10000);
  CHECK(AttackSpec::defaults(AttackId::Evolutionary).budget == 10000);
}

TEST_CASE("nattack with a single sample and zero learning rate keeps its mean") {
  Rng rng(9);
  const AffineClassifier clf = random_affine(rng);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0, 1);
  const int y = clf.predict(x)[0];
  AttackSpec s = small_spec(AttackId::NAttack);
  s.nattack_population = 1;
  s.nattack_lr = 0.0;
  s.budget = 40;
  Rng r1(3), r2(3);
  const AdvResult a = nattack(clf, x, y, s, r1);
  s.nattack_lr = 0.5;
  const AdvResult b = nattack(clf, x, y, s, r2);
  CHECK(a.adv == b.adv);
  CHECK(test::linf_dist(a.adv, x) <= s.epsilon + 1e-6);
  CHECK(test::in_box(a.adv));
}

TEST_CASE("decision-based start search") {
  Rng rng(10);
  const AffineClassifier clf = random_affine(rng);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0, 1);
  const int y = clf.predict(x)[0];
  for (AttackId id : {AttackId::Boundary, AttackId::Evolutionary}) {
    AttackSpec s = small_spec(id, NormKind::L2);
    s.init_trials = 0;
    CHECK_THROWS_AS(run_single(clf, x, y, s, rng), InitError);
    const std::vector<int> labels{y};
    const auto r = run_attack(clf, x, labels, s);
    CHECK(r[0].init_failed);
    CHECK_FALSE(r[0].success);
  }
}

TEST_CASE("decision-based best norm never grows with more queries") {
  Rng rng(11);
  const AffineClassifier clf = random_affine(rng);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0.2, 0.8);
  const int y = clf.predict(x)[0];
  for (AttackId id : {AttackId::Boundary, AttackId::Evolutionary}) {
    CAPTURE(attack_name(id));
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t budget : {50, 100, 200, 400, 800}) {
      AttackSpec s = small_spec(id, NormKind::L2);
      s.budget = budget;
      s.iterations = 100000;
      Rng r(4);
      const AdvResult a = run_single(clf, x, y, s, r);
      REQUIRE(a.success);
      CHECK(a.norm_l2 <= prev);
      CHECK(a.queries <= budget);
      prev = a.norm_l2;
    }
  }
}

TEST_CASE("evolutionary sanity mode") {
  Rng rng(12);
  const AffineClassifier clf = random_affine(rng);
  const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0.2, 0.8);
  const int y = clf.predict(x)[0];
  AttackSpec s = small_spec(AttackId::Evolutionary, NormKind::L2);
  s.evo_ccov = 0.0;
  s.evo_reduced_side = 0;
  Rng r1(5), r2(5);
  const AdvResult full = evolutionary_attack(clf, x, y, s, r1);
  s.evo_reduced_side = 4;  // equal to the image side: same sampling space
  const AdvResult same = evolutionary_attack(clf, x, y, s, r2);
  CHECK(full.adv == same.adv);
  CHECK(full.success);
  CHECK(clf.predict(full.adv)[0] != y);
}

TEST_CASE("si-ni-fgsm degenerates to fgsm") {
  Rng rng(13);
  for (int t = 0; t < 20; ++t) {
    const AffineClassifier clf = random_affine(rng);
    const Tensor x = test::random_tensor({1, 3, 4, 4}, rng, 0, 1);
    const int y = static_cast<int>(rng.integer(0, 2));
    AttackSpec s = AttackSpec::defaults(AttackId::SINIFGSM);
    s.sini_scales = 1;
    s.sini_momentum = 0.0;
    s.iterations = 1;
    CHECK(si_ni_fgsm(clf, x, y, s).adv == fgsm(clf, x, y, AttackSpec::defaults(AttackId::FGSM)).adv);
  }
  AttackSpec bad = AttackSpec::defaults(AttackId::SINIFGSM);
  bad.sini_scales = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("min_norm_to_curve") {
  std::vector<AdvResult> r(2);
  r[0].success = r[1].success = true;
  r[0].norm_linf = 0.1;
  r[1].norm_linf = 0.3;
  const std::vector<double> grid{0.2};
  CHECK(min_norm_to_curve(r, NormKind::Linf, grid)[0] == 0.5);
  const std::vector<double> wide{0.0, 0.05, 1.0};
  r[1].success = false;
  r[1].norm_linf = std::numeric_limits<double>::infinity();
  const auto c = min_norm_to_curve(r, NormKind::Linf, wide);
  CHECK(c == std::vector<double>{1.0, 1.0, 0.5});
  CHECK_THROWS_AS(min_norm_to_curve({}, NormKind::Linf, grid), MetricError);
}

TEST_CASE("spec validation and names") {
  for (AttackId id : kAllAttacks) CHECK(parse_attack(attack_name(id)) == id);
  CHECK_THROWS_AS(parse_attack("hopskipjump"), ConfigError);
  CHECK(parse_norm("l2") == NormKind::L2);
  AttackSpec s = AttackSpec::defaults(AttackId::FGSM, NormKind::L2);
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = AttackSpec::defaults(AttackId::PGD);
  s.epsilon = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(AttackSpec::defaults(AttackId::PGD).alpha() == doctest::Approx(2.5 * 0.03 / 20));
}

TEST_CASE("desk model: constraints, determinism and query accounting") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::BNN, d);
  const ModelClassifier clf(m);
  const std::size_t n = 6;
  const Tensor xs = slice_rows(d.test.images, 0, n);
  const std::vector<int> ys(d.test.labels.begin(), d.test.labels.begin() + n);

  for (AttackId id : kAllAttacks) {
    for (NormKind norm : {NormKind::Linf, NormKind::L2}) {
      AttackSpec s = small_spec(id, norm);
      try {
        s.validate();
      } catch (const ConfigError&) {
        continue;
      }
      CAPTURE(attack_name(id));
      CAPTURE(norm_name(norm));
      const test::CountingClassifier counter(clf);
      const auto a = run_attack(counter, xs, ys, s);
      const auto b = run_attack(clf, xs, ys, s, 2);
      std::size_t total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const Tensor x = slice_rows(xs, i, 1);
        CHECK(a[i].adv == b[i].adv);
        CHECK(a[i].success == b[i].success);
        CHECK(a[i].queries == b[i].queries);
        CHECK(test::in_box(a[i].adv));
        if (!is_min_norm(id)) {
          const double dist = norm == NormKind::Linf ? test::linf_dist(a[i].adv, x) : test::l2_dist(a[i].adv, x);
          CHECK(dist <= s.epsilon + 1e-6);
        }
        if (s.budget > 0) CHECK(a[i].queries <= s.budget);
        total += a[i].queries;
      }
      const AttackFamily fam = attack_family(id);
      if (fam == AttackFamily::ScoreBased || fam == AttackFamily::DecisionBased) CHECK(counter.rows() == total);
      if (fam != AttackFamily::WhiteBox && fam != AttackFamily::Transfer) CHECK(counter.gradients() == 0);
    }
  }
}

TEST_CASE("desk model: pgd is at least as strong as fgsm") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::FP32, d);
  const ModelClassifier clf(m);
  AttackSpec f = AttackSpec::defaults(AttackId::FGSM), p = AttackSpec::defaults(AttackId::PGD);
  p.seed = 1;
  const auto rf = run_attack(clf, d.test.images, d.test.labels, f);
  const auto rp = run_attack(clf, d.test.images, d.test.labels, p);
  CHECK(accuracy(rp) <= accuracy(rf));
}

TEST_CASE("desk model: nattack beats spsa at equal budget") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::BNN, d);
  const ModelClassifier clf(m);
  const std::size_t n = 20;
  const Tensor xs = slice_rows(d.test.images, 0, n);
  const std::vector<int> ys(d.test.labels.begin(), d.test.labels.begin() + n);
  AttackSpec sp = AttackSpec::defaults(AttackId::SPSA), na = AttackSpec::defaults(AttackId::NAttack);
  sp.budget = na.budget = 1000;
  const auto rs = run_attack(clf, xs, ys, sp);
  const auto rn = run_attack(clf, xs, ys, na);
  MESSAGE("spsa acc " << accuracy(rs) << ", nattack acc " << accuracy(rn));
  CHECK(accuracy(rn) < accuracy(rs));
}

TEST_CASE("desk model: evolutionary reaches smaller linf norms than boundary") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::BNN, d);
  const ModelClassifier clf(m);
  const std::size_t n = 10;
  const Tensor xs = slice_rows(d.test.images, 0, n);
  const std::vector<int> ys(d.test.labels.begin(), d.test.labels.begin() + n);
  AttackSpec bo = AttackSpec::defaults(AttackId::Boundary, NormKind::L2),
             ev = AttackSpec::defaults(AttackId::Evolutionary, NormKind::L2);
  bo.budget = ev.budget = 2000;
  auto median = [](const std::vector<AdvResult>& r) {
    std::vector<double> v;
    for (const auto& a : r) v.push_back(a.norm_linf);
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double mb = median(run_attack(clf, xs, ys, bo)), me = median(run_attack(clf, xs, ys, ev));
  MESSAGE("boundary median linf " << mb << ", evolutionary " << me);
  CHECK(me < mb);
}

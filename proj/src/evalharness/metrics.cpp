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
#include <cstdio>
#include <map>

#include "arbb/evaluation.hpp"

namespace arbb {

std::string format_decimal(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::uint8_t> correct_mask(const Classifier& clf, const Dataset& ds, std::size_t batch) {
  std::vector<std::uint8_t> out(ds.size());
  for (std::size_t b = 0; b < ds.size(); b += batch) {
    const std::size_t n = std::min(batch, ds.size() - b);
    const auto pred = clf.predict(slice_rows(ds.images, b, n));
    for (std::size_t i = 0; i < n; ++i) out[b + i] = pred[i] == ds.labels[b + i] ? 1 : 0;
  }
  return out;
}

double clean_accuracy(const Classifier& clf, const Dataset& ds, std::size_t batch) {
  if (ds.size() == 0) throw MetricError("accuracy of an empty dataset");
  const auto mask = correct_mask(clf, ds, batch);
  return static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / static_cast<double>(ds.size());
}

double acc_norm(double acc_star, double acc) {
  if (!(acc > 0.0)) throw MetricError("normalized accuracy is undefined when clean accuracy is 0");
  return acc_star / acc;
}

double robustness_score(std::span<const double> v) {
  if (v.empty()) throw ConfigError("robustness score of an empty list");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double adversarial_accuracy(const Classifier& target, const Dataset& ds, std::span<const AdvResult> results,
                            const AttackSpec& spec, std::span<const std::uint8_t> clean_correct) {
  if (results.size() != ds.size() || clean_correct.size() != ds.size()) {
    throw ShapeError("attack results do not match the dataset");
  }
  std::size_t robust = 0;
  if (is_min_norm(spec.method)) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      robust += (clean_correct[i] && (!results[i].success || results[i].norm(spec.norm) > spec.epsilon)) ? 1 : 0;
    }
  } else {
    std::vector<Tensor> advs;
    advs.reserve(results.size());
    for (const auto& r : results) advs.push_back(r.adv);
    const Tensor batch = concat_rows<float>(advs);
    const auto pred = target.predict(batch);
    for (std::size_t i = 0; i < ds.size(); ++i) robust += (clean_correct[i] && pred[i] == ds.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(robust) / static_cast<double>(ds.size());
}

AttackEval evaluate_attack(const Classifier& clf, const Dataset& ds, const AttackSpec& spec, std::size_t workers,
                           const Classifier* target) {
  const Classifier& tgt = target ? *target : clf;
  AttackEval ev;
  ev.spec = spec;
  ev.images = ds.size();
  const auto mask = correct_mask(tgt, ds);
  ev.acc = static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / static_cast<double>(ds.size());
  const auto results = run_attack(clf, ds.images, ds.labels, spec, workers);
  for (const auto& r : results) {
    ev.init_failures += r.init_failed ? 1 : 0;
    ev.max_queries = std::max(ev.max_queries, r.queries);
  }
  ev.acc_star = adversarial_accuracy(tgt, ds, results, spec, mask);
  ev.acc_norm = acc_norm(ev.acc_star, ev.acc);
  return ev;
}

std::string Curve::csv() const {
  std::string out = "eps,acc_norm\n";
  for (const auto& p : points) out += format_decimal(p.eps) + "," + format_decimal(p.acc_norm) + "\n";
  return out;
}

Curve robustness_curve(const Classifier& clf, const Dataset& ds, const AttackSpec& base, std::span<const double> grid,
                       std::size_t workers) {
  if (grid.empty() || grid.front() != 0.0) throw ConfigError("curve grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw ConfigError("curve grid must be strictly ascending");
  }
  Curve c;
  c.attack = std::string(attack_name(base.method));
  c.norm = std::string(norm_name(base.norm));
  const auto mask = correct_mask(clf, ds);
  const double acc = static_cast<double>(std::count(mask.begin(), mask.end(), 1)) / static_cast<double>(ds.size());
  if (is_min_norm(base.method)) {
    const auto results = run_attack(clf, ds.images, ds.labels, base, workers);
    for (double eps : grid) {
      AttackSpec s = base;
      s.epsilon = eps;
      c.points.push_back({eps, acc_norm(adversarial_accuracy(clf, ds, results, s, mask), acc)});
    }
    return c;
  }
  for (double eps : grid) {
    AttackSpec s = base;
    s.epsilon = eps;
    const auto results = run_attack(clf, ds.images, ds.labels, s, workers);
    c.points.push_back({eps, acc_norm(adversarial_accuracy(clf, ds, results, s, mask), acc)});
  }
  return c;
}

std::string PointwiseTable::csv() const {
  std::string out = "attack,family";
  for (const auto& m : models) out += "," + m;
  out += "\n";
  for (std::size_t a = 0; a < attacks.size(); ++a) {
    out += attacks[a] + "," + std::string(family_name(families[a]));
    for (double v : acc_norm[a]) out += "," + format_decimal(v);
    out += "\n";
  }
  for (std::size_t f = 0; f < rs_families.size(); ++f) {
    out += "RS," + rs_families[f];
    for (double v : rs[f]) out += "," + format_decimal(v);
    out += "\n";
  }
  return out;
}

PointwiseTable make_pointwise_table(const std::vector<std::string>& models,
                                    const std::vector<std::vector<AttackEval>>& evals) {
  PointwiseTable t;
  t.models = models;
  std::map<AttackFamily, std::vector<std::size_t>> rows;
  for (std::size_t a = 0; a < evals.size(); ++a) {
    if (evals[a].size() != models.size()) throw ShapeError("evaluation row does not cover every model");
    const auto& spec = evals[a].front().spec;
    t.attacks.push_back(std::string(attack_name(spec.method)));
    t.families.push_back(attack_family(spec.method));
    std::vector<double> row;
    for (const auto& e : evals[a]) row.push_back(e.acc_norm);
    t.acc_norm.push_back(std::move(row));
    rows[t.families.back()].push_back(a);
  }
  for (const auto& [fam, idx] : rows) {
    t.rs_families.push_back(std::string(family_name(fam)));
    std::vector<double> rs;
    for (std::size_t m = 0; m < models.size(); ++m) {
      std::vector<double> col;
      for (auto a : idx) col.push_back(t.acc_norm[a][m]);
      rs.push_back(robustness_score(col));
    }
    t.rs.push_back(std::move(rs));
  }
  return t;
}

PointwiseTable pointwise_table(std::span<const NamedClassifier> models, const Dataset& ds,
                               std::span<const AttackSpec> attacks, std::size_t workers) {
  if (models.empty()) throw ConfigError("pointwise table needs at least one model");
  std::vector<std::string> names;
  for (const auto& m : models) {
    if (m.clf->num_classes() != models.front().clf->num_classes()) {
      throw ConfigError("pointwise table models must share the class count");
    }
    names.push_back(m.name);
  }
  std::vector<std::vector<AttackEval>> evals;
  for (const auto& spec : attacks) {
    std::vector<AttackEval> row;
    for (const auto& m : models) row.push_back(evaluate_attack(*m.clf, ds, spec, workers));
    evals.push_back(std::move(row));
  }
  return make_pointwise_table(names, evals);
}

std::string Heatmap::csv() const {
  std::string out;
  for (const auto& n : names) out += "," + n;
  out += "\n";
  for (std::size_t s = 0; s < names.size(); ++s) {
    out += names[s];
    for (double v : values[s]) out += "," + format_decimal(v);
    out += "\n";
  }
  return out;
}

Heatmap transfer_heatmap(std::span<const NamedClassifier> models, const Dataset& ds, const AttackSpec& spec,
                         std::size_t workers) {
  if (models.empty()) throw ConfigError("heatmap needs at least one model");
  Heatmap h;
  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<double> accs;
  for (const auto& m : models) {
    h.names.push_back(m.name);
    masks.push_back(correct_mask(*m.clf, ds));
    const auto& mk = masks.back();
    accs.push_back(static_cast<double>(std::count(mk.begin(), mk.end(), 1)) / static_cast<double>(ds.size()));
  }
  for (const auto& s : models) {
    const auto results = run_attack(*s.clf, ds.images, ds.labels, spec, workers);
    std::vector<double> row;
    for (std::size_t t = 0; t < models.size(); ++t) {
      row.push_back(acc_norm(adversarial_accuracy(*models[t].clf, ds, results, spec, masks[t]), accs[t]));
    }
    h.values.push_back(std::move(row));
  }
  return h;
}

}  // namespace arbb

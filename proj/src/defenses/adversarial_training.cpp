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

#include "arbb/defenses.hpp"
#include "arbb/ops.hpp"
#include "attacks/common.hpp"

namespace arbb {

Tensor pgd_batch(const Classifier& clf, const Tensor& x, std::span<const int> labels, double eps, double alpha,
                 std::size_t steps, bool random_start, Rng& rng) {
  if (eps == 0.0) return x;
  Tensor cur = x;
  if (random_start) {
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = static_cast<float>(x[i] + rng.uniform(-eps, eps));
    detail::project_linf(cur, x, eps);
    detail::clip_box(cur);
  }
  const std::vector<int> y(labels.begin(), labels.end());
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor g = clf.input_gradient(cur, [&](const Tensor& z) { return cross_entropy_seed(z, y); });
    cur = detail::linf_step(x, cur, detail::to_double(g), alpha, eps);
  }
  return cur;
}

BatchLoss pgd_at_loss(Graph<float>& g, const Model& model, const Tensor& images, std::span<const int> labels,
                      const DefenseSpec& spec, Rng& rng) {
  spec.validate();
  const ModelClassifier clf(model);
  const Tensor adv = pgd_batch(clf, images, labels, spec.epsilon, spec.inner_alpha(), spec.steps, true, rng);
  auto x = g.constant(adv);
  auto logits = model.forward(g, x);
  return {ops::softmax_cross_entropy(g, logits, labels), logits};
}

BatchLoss trades_loss(Graph<float>& g, const Model& model, const Tensor& images, std::span<const int> labels,
                      const DefenseSpec& spec, Rng& rng) {
  spec.validate();
  const ModelClassifier clf(model);
  const double eps = spec.epsilon, alpha = spec.inner_alpha();
  Tensor adv = images;
  if (eps > 0.0) {
    const Tensor p_clean = softmax(clf.logits(images));
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = static_cast<float>(images[i] + 0.001 * rng.normal());
    detail::project_linf(adv, images, eps);
    detail::clip_box(adv);
    for (std::size_t t = 0; t < spec.steps; ++t) {
      // d KL(p || softmax(q)) / dq = softmax(q) - p
      const Tensor grad = clf.input_gradient(adv, [&](const Tensor& q) {
        Tensor s = softmax(q);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] -= p_clean[i];
        return s;
      });
      adv = detail::linf_step(images, adv, detail::to_double(grad), alpha, eps);
    }
  }
  auto xc = g.constant(images);
  auto xa = g.constant(adv);
  auto clean = model.forward(g, xc);
  auto robust = model.forward(g, xa);
  auto ce = ops::softmax_cross_entropy(g, clean, labels);
  auto kl = ops::softmax_kl(g, clean, robust);
  return {ops::add(g, ce, ops::scale(g, kl, spec.beta)), clean};
}

LossHook defense_loss(const DefenseSpec& spec) {
  spec.validate();
  if (spec.id == DefenseId::PGDAT) {
    return [spec](Graph<float>& g, const Model& m, const Tensor& x, std::span<const int> y, Rng& rng) {
      return pgd_at_loss(g, m, x, y, spec, rng);
    };
  }
  if (spec.id == DefenseId::TRADES) {
    return [spec](Graph<float>& g, const Model& m, const Tensor& x, std::span<const int> y, Rng& rng) {
      return trades_loss(g, m, x, y, spec, rng);
    };
  }
  throw ConfigError(std::string(defense_name(spec.id)) + " does not change the training loss");
}

}  // namespace arbb

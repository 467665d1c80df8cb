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

#include "arbb/parallel.hpp"
#include "attacks/common.hpp"

namespace arbb {

AdvResult run_single(const Classifier& clf, const Tensor& x, int y, const AttackSpec& spec, Rng& rng) {
  switch (spec.method) {
    case AttackId::FGSM:
      return fgsm(clf, x, y, spec);
    case AttackId::PGD:
      return pgd(clf, x, y, spec, rng);
    case AttackId::DeepFool:
      return deepfool(clf, x, y, spec);
    case AttackId::CW:
      return cw_l2(clf, x, y, spec);
    case AttackId::SPSA:
      return spsa(clf, x, y, spec, rng);
    case AttackId::NAttack:
      return nattack(clf, x, y, spec, rng);
    case AttackId::Square:
      return square_attack(clf, x, y, spec, rng);
    case AttackId::Boundary:
      return boundary_attack(clf, x, y, spec, rng);
    case AttackId::Evolutionary:
      return evolutionary_attack(clf, x, y, spec, rng);
    case AttackId::SINIFGSM:
      return si_ni_fgsm(clf, x, y, spec);
  }
  throw ConfigError("unhandled attack id");
}

std::vector<AdvResult> run_attack(const Classifier& clf, const Tensor& images, std::span<const int> labels,
                                  const AttackSpec& spec, std::size_t workers) {
  spec.validate();
  if (images.rank() != 4 || images.dim(0) != labels.size()) {
    throw ShapeError("run_attack expects [N,C,H,W] images with N labels");
  }
  std::vector<AdvResult> out(labels.size());
  parallel_for(labels.size(), workers, [&](std::size_t i) {
    Rng rng(derive_seed(spec.seed, "image", i));
    const Tensor x = slice_rows(images, i, 1);
    try {
      out[i] = run_single(clf, x, labels[i], spec, rng);
    } catch (const InitError&) {
      AdvResult r = detail::failed_min_norm(x, spec.budget);
      r.init_failed = true;
      out[i] = std::move(r);
    }
  });
  return out;
}

}  // namespace arbb

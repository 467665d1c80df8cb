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

#ifndef ARBB_EVALUATION_HPP
#define ARBB_EVALUATION_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arbb/attacks.hpp"
#include "arbb/dataset.hpp"
#include "arbb/model.hpp"

namespace arbb {

double clean_accuracy(const Classifier& clf, const Dataset& ds, std::size_t batch = 256);
// acc_star / acc; MetricError when acc is 0.
double acc_norm(double acc_star, double acc);
// Arithmetic mean; ConfigError on an empty list.
double robustness_score(std::span<const double> norm_accs);

// Per-image correctness of clf on ds.
std::vector<std::uint8_t> correct_mask(const Classifier& clf, const Dataset& ds, std::size_t batch = 256);

struct AttackEval {
  AttackSpec spec;
  double acc = 0.0;       // clean accuracy of the evaluated classifier
  double acc_star = 0.0;  // clean and adversarial prediction both correct
  double acc_norm = 0.0;
  std::size_t images = 0;
  std::size_t init_failures = 0;
  std::size_t max_queries = 0;
};

// ACC* from attack results. Budgeted attacks count an image when the
// target classifies both the clean and the adversarial input correctly;
// min-norm attacks threshold their achieved norm at spec.epsilon.
double adversarial_accuracy(const Classifier& target, const Dataset& ds, std::span<const AdvResult> results,
                            const AttackSpec& spec, std::span<const std::uint8_t> clean_correct);

// Attacks clf (the surrogate when target is given) and scores the target.
AttackEval evaluate_attack(const Classifier& clf, const Dataset& ds, const AttackSpec& spec, std::size_t workers = 1,
                           const Classifier* target = nullptr);

struct CurvePoint {
  double eps = 0.0;
  double acc_norm = 0.0;
};

struct Curve {
  std::string model;
  std::string attack;
  std::string norm;
  std::vector<CurvePoint> points;
  std::string csv() const;  // eps,acc_norm
};

// grid ascending from 0. Budgeted attacks rerun per eps; min-norm attacks
// run once and are thresholded.
Curve robustness_curve(const Classifier& clf, const Dataset& ds, const AttackSpec& base, std::span<const double> grid,
                       std::size_t workers = 1);

struct NamedClassifier {
  std::string name;
  const Classifier* clf;
};

struct PointwiseTable {
  std::vector<std::string> models;
  std::vector<std::string> attacks;
  std::vector<AttackFamily> families;           // per attack row
  std::vector<std::vector<double>> acc_norm;    // [attack][model]
  std::vector<std::string> rs_families;
  std::vector<std::vector<double>> rs;          // [family][model]
  std::string csv() const;
};

PointwiseTable pointwise_table(std::span<const NamedClassifier> models, const Dataset& ds,
                               std::span<const AttackSpec> attacks, std::size_t workers = 1);
// Same layout from already computed evaluations, [attack][model].
PointwiseTable make_pointwise_table(const std::vector<std::string>& models,
                                    const std::vector<std::vector<AttackEval>>& evals);

struct Heatmap {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // [surrogate][target]
  std::string csv() const;                  // header row and column of names
};

Heatmap transfer_heatmap(std::span<const NamedClassifier> models, const Dataset& ds, const AttackSpec& spec,
                         std::size_t workers = 1);

// Class activation map of one image [1,C,H,W]: head-weighted sum of the
// final feature maps, min-max normalized (constant maps become zero) and
// nearest-upsampled to the input size. Returns [H,W].
Tensor compute_cam(const Model& model, const Tensor& x, int class_id);
// features [C,h,w], weights [C].
Tensor cam_from_features(const Tensor& features, std::span<const float> weights, std::size_t out_h, std::size_t out_w);
// Fraction of pixels strictly above the threshold.
double roi_concentration(const Tensor& cam, double threshold = 0.5);

// Fixed-precision decimal used in every CSV artifact.
std::string format_decimal(double v);

}  // namespace arbb

#endif  // ARBB_EVALUATION_HPP

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

#ifndef ARBB_REPORT_HPP
#define ARBB_REPORT_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "arbb/evaluation.hpp"

namespace arbb {

struct AttackEntry {
  std::string attack;
  std::string family;
  std::string norm;
  double epsilon = 0.0;
  double acc_star = 0.0;
  double acc_norm = 0.0;
  std::size_t images = 0;
  std::size_t init_failures = 0;
  std::size_t max_queries = 0;
};

AttackEntry attack_entry(const AttackEval& ev);

struct RobustnessReport {
  std::string model;
  double clean_acc = 0.0;
  std::vector<AttackEntry> attacks;
  std::vector<std::pair<std::string, double>> family_rs;  // family -> mean ACC_norm
  std::vector<Curve> curves;
  std::optional<Heatmap> heatmap;
  std::string config_json = "{}";  // embedded verbatim as a JSON value
  std::uint64_t seed = 0;
  std::vector<std::string> failures;

  // Recomputes family_rs from attacks, families in first-seen order.
  void update_family_rs();
};

// Deterministic JSON (sorted keys, shortest round-trip numbers).
std::string report_to_json(const RobustnessReport& r);
RobustnessReport report_from_json(std::string_view text);
// {"reports": [...]} in the given order.
std::string merge_report_json(std::span<const std::string> reports);

}  // namespace arbb

#endif  // ARBB_REPORT_HPP

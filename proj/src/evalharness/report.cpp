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

#include "arbb/report.hpp"

#include "json.hpp"

namespace arbb {

using nlohmann::json;

AttackEntry attack_entry(const AttackEval& ev) {
  AttackEntry e;
  e.attack = std::string(attack_name(ev.spec.method));
  e.family = std::string(family_name(attack_family(ev.spec.method)));
  e.norm = std::string(norm_name(ev.spec.norm));
  e.epsilon = ev.spec.epsilon;
  e.acc_star = ev.acc_star;
  e.acc_norm = ev.acc_norm;
  e.images = ev.images;
  e.init_failures = ev.init_failures;
  e.max_queries = ev.max_queries;
  return e;
}

void RobustnessReport::update_family_rs() {
  family_rs.clear();
  std::vector<std::string> order;
  for (const auto& a : attacks) {
    if (std::find(order.begin(), order.end(), a.family) == order.end()) order.push_back(a.family);
  }
  for (const auto& f : order) {
    std::vector<double> v;
    for (const auto& a : attacks) {
      if (a.family == f) v.push_back(a.acc_norm);
    }
    family_rs.emplace_back(f, robustness_score(v));
  }
}

std::string report_to_json(const RobustnessReport& r) {
  json j;
  j["model"] = r.model;
  j["clean_acc"] = r.clean_acc;
  j["seed"] = r.seed;
  json attacks = json::array();
  for (const auto& a : r.attacks) {
    attacks.push_back({{"attack", a.attack},
                       {"family", a.family},
                       {"norm", a.norm},
                       {"epsilon", a.epsilon},
                       {"acc_star", a.acc_star},
                       {"acc_norm", a.acc_norm},
                       {"images", a.images},
                       {"init_failures", a.init_failures},
                       {"max_queries", a.max_queries}});
  }
  j["attacks"] = attacks;
  json rs = json::array();
  for (const auto& [f, v] : r.family_rs) rs.push_back({{"family", f}, {"rs", v}});
  j["family_rs"] = rs;
  json curves = json::array();
  for (const auto& c : r.curves) {
    json pts = json::array();
    for (const auto& p : c.points) pts.push_back({p.eps, p.acc_norm});
    curves.push_back({{"model", c.model}, {"attack", c.attack}, {"norm", c.norm}, {"points", pts}});
  }
  j["curves"] = curves;
  if (r.heatmap) {
    j["heatmap"] = {{"names", r.heatmap->names}, {"values", r.heatmap->values}};
  } else {
    j["heatmap"] = nullptr;
  }
  try {
    j["config"] = json::parse(r.config_json);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config echo is not valid JSON: ") + e.what());
  }
  j["failures"] = r.failures;
  return j.dump(2) + "\n";
}

RobustnessReport report_from_json(std::string_view text) {
  RobustnessReport r;
  try {
    const json j = json::parse(text);
    r.model = j.at("model").get<std::string>();
    r.clean_acc = j.at("clean_acc").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& a : j.at("attacks")) {
      AttackEntry e;
      e.attack = a.at("attack").get<std::string>();
      e.family = a.at("family").get<std::string>();
      e.norm = a.at("norm").get<std::string>();
      e.epsilon = a.at("epsilon").get<double>();
      e.acc_star = a.at("acc_star").get<double>();
      e.acc_norm = a.at("acc_norm").get<double>();
      e.images = a.at("images").get<std::size_t>();
      e.init_failures = a.at("init_failures").get<std::size_t>();
      e.max_queries = a.at("max_queries").get<std::size_t>();
      r.attacks.push_back(std::move(e));
    }
    for (const auto& f : j.at("family_rs")) {
      r.family_rs.emplace_back(f.at("family").get<std::string>(), f.at("rs").get<double>());
    }
    for (const auto& c : j.at("curves")) {
      Curve cv;
      cv.model = c.at("model").get<std::string>();
      cv.attack = c.at("attack").get<std::string>();
      cv.norm = c.at("norm").get<std::string>();
      for (const auto& p : c.at("points")) cv.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      r.curves.push_back(std::move(cv));
    }
    if (!j.at("heatmap").is_null()) {
      Heatmap h;
      h.names = j["heatmap"].at("names").get<std::vector<std::string>>();
      h.values = j["heatmap"].at("values").get<std::vector<std::vector<double>>>();
      r.heatmap = std::move(h);
    }
    r.config_json = j.at("config").dump();
    r.failures = j.at("failures").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(0, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string merge_report_json(std::span<const std::string> reports) {
  json out;
  out["reports"] = json::array();
  for (const auto& text : reports) {
    try {
      out["reports"].push_back(json::parse(text));
    } catch (const json::exception& e) {
      throw FormatError(0, std::string("malformed report: ") + e.what());
    }
  }
  return out.dump(2) + "\n";
}

}  // namespace arbb

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

#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "arbb/bitkernel.hpp"
#include "arbb/checkpoint.hpp"
#include "arbb/evaluation.hpp"
#include "arbb/experiment.hpp"
#include "arbb/report.hpp"
#include "arbb/rng.hpp"
#include "json.hpp"

namespace arbb {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
  if (!f) throw ConfigError("write failed: " + path.string());
}

namespace {

// File-name friendly form of attack and defense names ("r&p" -> "r_p").
std::string slug(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-') ? c : '_';
  return out;
}

Model load_model(const ExperimentConfig& cfg, const ModelBlock& m, const Dataset& eval) {
  const auto path = checkpoint_path(cfg, m);
  if (!std::filesystem::exists(path)) {
    throw ConfigError("checkpoint " + path.string() + " not found; run `arbb train` first");
  }
  Model model = load_checkpoint(path);
  if (model.num_classes() != eval.num_classes()) {
    throw ConfigError("checkpoint " + path.string() + " has " + std::to_string(model.num_classes()) +
                      " classes, the dataset has " + std::to_string(eval.num_classes()));
  }
  return model;
}

struct Loaded {
  std::vector<std::string> names;
  std::vector<std::unique_ptr<Model>> models;
  std::vector<std::unique_ptr<Classifier>> classifiers;
};

Loaded load_all(const ExperimentConfig& cfg, const Dataset& eval, bool apply_transform) {
  Loaded l;
  for (const auto& m : cfg.targets()) {
    l.names.push_back(m.name);
    l.models.push_back(std::make_unique<Model>(load_model(cfg, m, eval)));
    const Model& model = *l.models.back();
    if (apply_transform && cfg.defense && is_transform(cfg.defense->id)) {
      l.classifiers.push_back(std::make_unique<DefendedClassifier>(model, *cfg.defense));
    } else {
      l.classifiers.push_back(std::make_unique<ModelClassifier>(model));
    }
  }
  return l;
}

RobustnessReport base_report(const ExperimentConfig& cfg, const std::string& name) {
  RobustnessReport r;
  r.model = name;
  r.config_json = cfg.raw_json;
  r.seed = cfg.seed;
  return r;
}

std::string attack_label(const AttackSpec& s) {
  return std::string(attack_name(s.method)) + "/" + std::string(norm_name(s.norm));
}

// Evaluates every configured attack against each classifier. Failures are
// recorded per (model, attack) and the remaining work continues.
struct AttackSweep {
  std::vector<RobustnessReport> reports;
  std::vector<std::vector<AttackEval>> evals;  // [attack][model], complete rows only
  bool failed = false;
};

AttackSweep sweep(const ExperimentConfig& cfg, const Loaded& l, const Dataset& eval, const RunOptions& opt) {
  AttackSweep s;
  for (std::size_t m = 0; m < l.names.size(); ++m) {
    auto r = base_report(cfg, l.names[m]);
    try {
      r.clean_acc = clean_accuracy(*l.classifiers[m], eval);
    } catch (const Error& e) {
      r.failures.push_back(std::string("clean: ") + e.what());
      s.failed = true;
    }
    s.reports.push_back(std::move(r));
  }
  for (const auto& spec : cfg.attacks) {
    std::vector<AttackEval> row;
    for (std::size_t m = 0; m < l.names.size(); ++m) {
      try {
        row.push_back(evaluate_attack(*l.classifiers[m], eval, spec, opt.workers));
        s.reports[m].attacks.push_back(attack_entry(row.back()));
      } catch (const Error& e) {
        s.reports[m].failures.push_back(attack_label(spec) + ": " + e.what());
        std::fprintf(stderr, "%s %s: %s\n", l.names[m].c_str(), attack_label(spec).c_str(), e.what());
        s.failed = true;
      }
    }
    if (row.size() == l.names.size()) s.evals.push_back(std::move(row));
  }
  for (auto& r : s.reports) {
    if (!r.attacks.empty()) r.update_family_rs();
  }
  return s;
}

void print_sweep(const AttackSweep& s) {
  for (const auto& r : s.reports) {
    std::printf("%s clean %s\n", r.model.c_str(), format_decimal(r.clean_acc).c_str());
    for (const auto& a : r.attacks) {
      std::printf("  %-20s %-5s eps %s  acc_norm %s\n", a.attack.c_str(), a.norm.c_str(),
                  format_decimal(a.epsilon).c_str(), format_decimal(a.acc_norm).c_str());
    }
    for (const auto& [f, v] : r.family_rs) std::printf("  RS %-14s %s\n", f.c_str(), format_decimal(v).c_str());
  }
}

void require_attacks(const ExperimentConfig& cfg, const char* cmd) {
  if (cfg.attacks.empty()) throw ConfigError(std::string(cmd) + " needs at least one entry in attacks");
}

}  // namespace

int cmd_train(const ExperimentConfig& cfg, const RunOptions&) {
  const Splits sp = load_splits(cfg, true);
  const auto blocks = cfg.targets();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    Model model(b.resolved(sp.train), derive_seed(cfg.seed, "model.init", i));
    const TrainHistory h = train(model, sp.train, cfg.train, &sp.eval);
    save_checkpoint(model, checkpoint_path(cfg, b));
    write_text(cfg.output / (b.name + "_history.csv"), h.csv());
    std::printf("%s %s/%s params %zu eval accuracy %s\n", b.name.c_str(),
                std::string(architecture_name(model.config().architecture)).c_str(),
                std::string(scheme_name(model.config().scheme)).c_str(), model.parameter_count(),
                format_decimal(h.epochs.empty() ? accuracy(model, sp.eval) : h.epochs.back().eval_accuracy).c_str());
  }
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Splits sp = load_splits(cfg, false);
  const Loaded l = load_all(cfg, sp.eval, true);
  const AttackSweep s = sweep(cfg, l, sp.eval, opt);
  for (const auto& r : s.reports) write_text(cfg.output / ("report_" + r.model + ".json"), report_to_json(r));
  if (!s.evals.empty()) write_text(cfg.output / "pointwise.csv", make_pointwise_table(l.names, s.evals).csv());
  print_sweep(s);
  return s.failed ? 1 : 0;
}

int cmd_curve(const ExperimentConfig& cfg, const RunOptions& opt) {
  require_attacks(cfg, "curve");
  const Splits sp = load_splits(cfg, false);
  const Loaded l = load_all(cfg, sp.eval, true);
  bool failed = false;
  for (std::size_t m = 0; m < l.names.size(); ++m) {
    auto r = base_report(cfg, l.names[m]);
    r.clean_acc = clean_accuracy(*l.classifiers[m], sp.eval);
    for (const auto& spec : cfg.attacks) {
      try {
        Curve c = robustness_curve(*l.classifiers[m], sp.eval, spec, cfg.grid, opt.workers);
        c.model = l.names[m];
        write_text(cfg.output / ("curve_" + l.names[m] + "_" + slug(c.attack) + "_" + c.norm + ".csv"), c.csv());
        std::printf("%s %s/%s", l.names[m].c_str(), c.attack.c_str(), c.norm.c_str());
        for (const auto& p : c.points) std::printf(" %s", format_decimal(p.acc_norm).c_str());
        std::printf("\n");
        r.curves.push_back(std::move(c));
      } catch (const Error& e) {
        r.failures.push_back(attack_label(spec) + ": " + e.what());
        std::fprintf(stderr, "%s %s: %s\n", l.names[m].c_str(), attack_label(spec).c_str(), e.what());
        failed = true;
      }
    }
    write_text(cfg.output / ("curves_" + l.names[m] + ".json"), report_to_json(r));
  }
  return failed ? 1 : 0;
}

int cmd_heatmap(const ExperimentConfig& cfg, const RunOptions& opt) {
  const Splits sp = load_splits(cfg, false);
  const Loaded l = load_all(cfg, sp.eval, true);
  AttackSpec spec = cfg.attacks.empty() ? AttackSpec::defaults(AttackId::SINIFGSM) : cfg.attacks.front();
  if (cfg.attacks.empty()) spec.seed = derive_seed(cfg.seed, "attack", 0);
  if (is_min_norm(spec.method)) throw ConfigError("heatmap needs a fixed-budget attack, not a minimum-norm one");
  std::vector<NamedClassifier> named;
  for (std::size_t m = 0; m < l.names.size(); ++m) named.push_back({l.names[m], l.classifiers[m].get()});
  const Heatmap h = transfer_heatmap(named, sp.eval, spec, opt.workers);
  write_text(cfg.output / "heatmap.csv", h.csv());
  auto r = base_report(cfg, "heatmap");
  r.heatmap = h;
  write_text(cfg.output / "heatmap.json", report_to_json(r));
  std::printf("%s", h.csv().c_str());
  return 0;
}

int cmd_defend(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (!cfg.defense) throw ConfigError("defend needs a defense block");
  const DefenseSpec& d = *cfg.defense;
  const std::string dname = slug(defense_name(d.id));
  if (!is_transform(d.id)) {
    const Splits sp = load_splits(cfg, true);
    ExperimentConfig trained = cfg;
    trained.models.clear();
    const auto blocks = cfg.targets();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      ModelBlock b = blocks[i];
      Model model(b.resolved(sp.train), derive_seed(cfg.seed, "model.init", i));
      const TrainHistory h = train(model, sp.train, cfg.train, &sp.eval, defense_loss(d));
      b.name += "_" + dname;
      b.checkpoint = cfg.output / (b.name + ".ckpt");
      save_checkpoint(model, b.checkpoint);
      write_text(cfg.output / (b.name + "_history.csv"), h.csv());
      std::printf("%s eval accuracy %s\n", b.name.c_str(), format_decimal(accuracy(model, sp.eval)).c_str());
      trained.models.push_back(b);
    }
    if (cfg.attacks.empty()) return 0;
    const Loaded l = load_all(trained, sp.eval, false);
    const AttackSweep s = sweep(trained, l, sp.eval, opt);
    for (const auto& r : s.reports) write_text(cfg.output / ("report_" + r.model + ".json"), report_to_json(r));
    print_sweep(s);
    return s.failed ? 1 : 0;
  }
  require_attacks(cfg, "defend");
  const Splits sp = load_splits(cfg, false);
  const Loaded plain = load_all(cfg, sp.eval, false);
  const Loaded wrapped = load_all(cfg, sp.eval, true);
  const AttackSweep a = sweep(cfg, plain, sp.eval, opt);
  AttackSweep b = sweep(cfg, wrapped, sp.eval, opt);
  for (auto& r : b.reports) r.model += "_" + dname;
  std::string csv = "model,attack,norm,epsilon,undefended,defended\n";
  for (std::size_t m = 0; m < plain.names.size(); ++m) {
    const auto& ra = a.reports[m];
    const auto& rb = b.reports[m];
    write_text(cfg.output / ("report_" + ra.model + ".json"), report_to_json(ra));
    write_text(cfg.output / ("report_" + rb.model + ".json"), report_to_json(rb));
    for (const auto& ea : ra.attacks) {
      for (const auto& eb : rb.attacks) {
        if (ea.attack == eb.attack && ea.norm == eb.norm && ea.epsilon == eb.epsilon) {
          csv += ra.model + "," + ea.attack + "," + ea.norm + "," + format_decimal(ea.epsilon) + "," +
                 format_decimal(ea.acc_norm) + "," + format_decimal(eb.acc_norm) + "\n";
          break;
        }
      }
    }
  }
  write_text(cfg.output / ("defense_" + dname + ".csv"), csv);
  std::printf("%s", csv.c_str());
  return (a.failed || b.failed) ? 1 : 0;
}

int cmd_cam(const ExperimentConfig& cfg, const RunOptions&) {
  const Splits sp = load_splits(cfg, false);
  const Loaded l = load_all(cfg, sp.eval, false);
  const std::size_t n = std::min(cfg.cam_images, sp.eval.size());
  for (std::size_t m = 0; m < l.names.size(); ++m) {
    const Model& model = *l.models[m];
    std::string csv = "index,label,predicted,roi\n";
    json maps = json::array();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor x = sp.eval.image(i);
      const int y = sp.eval.labels[i];
      const Tensor cam = compute_cam(model, x, y);
      const double roi = roi_concentration(cam, cfg.cam_threshold);
      total += roi;
      csv += std::to_string(i) + "," + std::to_string(y) + "," + std::to_string(model.predict(x).front()) + "," +
             format_decimal(roi) + "\n";
      maps.push_back({{"index", i}, {"label", y}, {"shape", cam.shape()}, {"values", std::vector<float>(cam.data().begin(), cam.data().end())}});
    }
    write_text(cfg.output / ("cam_" + l.names[m] + ".csv"), csv);
    json j = {{"model", l.names[m]}, {"threshold", cfg.cam_threshold}, {"maps", maps}};
    write_text(cfg.output / ("cam_" + l.names[m] + ".json"), j.dump(2) + "\n");
    std::printf("%s mean roi %s\n", l.names[m].c_str(), format_decimal(n ? total / n : 0.0).c_str());
  }
  return 0;
}

int cmd_bench(const ExperimentConfig& cfg, const RunOptions& opt) {
  const auto rows = bench_throughput(cfg.bench_sizes, cfg.bench_rows, cfg.bench_cols, cfg.bench_repeats,
                                     derive_seed(cfg.seed, "bench"));
  std::string csv = opt.deterministic ? "rows,inner,cols,exact\n"
                                      : "rows,inner,cols,float_seconds,packed_seconds,float_gops,packed_gops,ratio,exact\n";
  bool exact = true;
  for (const auto& r : rows) {
    csv += std::to_string(r.rows) + "," + std::to_string(r.inner) + "," + std::to_string(r.cols) + ",";
    if (!opt.deterministic) {
      csv += format_decimal(r.float_seconds) + "," + format_decimal(r.packed_seconds) + "," +
             format_decimal(r.float_gops) + "," + format_decimal(r.packed_gops) + "," + format_decimal(r.ratio) + ",";
    }
    csv += std::string(r.exact ? "1" : "0") + "\n";
    exact = exact && r.exact;
  }
  write_text(cfg.output / "bench.csv", csv);
  std::printf("%s", csv.c_str());
  if (!exact) std::fprintf(stderr, "packed GEMM disagrees with the float reference\n");
  return exact ? 0 : 1;
}

int cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out) {
  if (inputs.empty()) throw ConfigError("report needs at least one input file");
  std::vector<std::string> texts;
  for (const auto& p : inputs) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    report_from_json(ss.str());  // validates the layout
    texts.push_back(ss.str());
  }
  write_text(out / "merged_report.json", merge_report_json(texts));
  return 0;
}

}  // namespace arbb

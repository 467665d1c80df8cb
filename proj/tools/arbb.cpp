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

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "arbb/error.hpp"
#include "arbb/experiment.hpp"
#include "arbb/parallel.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 0;  // 0 = hardware concurrency
  std::string out;
  bool deterministic = false;
};

int run(const std::string& cmd, const Globals& g, const std::vector<std::string>& inputs) {
  arbb::RunOptions opt;
  opt.deterministic = g.deterministic;
  opt.workers = g.deterministic ? 1 : (g.workers ? g.workers : arbb::default_workers());
  if (cmd == "report") {
    std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
    return arbb::cmd_report(paths, g.out.empty() ? "out" : g.out);
  }
  arbb::ExperimentConfig cfg = g.config.empty() ? arbb::parse_config("{}") : arbb::load_config(g.config);
  if (g.seed) cfg.apply_seed(*g.seed);
  if (!g.out.empty()) cfg.output = g.out;
  if (cmd == "train") return arbb::cmd_train(cfg, opt);
  if (cmd == "attack") return arbb::cmd_attack(cfg, opt);
  if (cmd == "curve") return arbb::cmd_curve(cfg, opt);
  if (cmd == "heatmap") return arbb::cmd_heatmap(cfg, opt);
  if (cmd == "defend") return arbb::cmd_defend(cfg, opt);
  if (cmd == "cam") return arbb::cmd_cam(cfg, opt);
  return arbb::cmd_bench(cfg, opt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness benchmark for binarized neural networks"};
  app.require_subcommand(1);
  Globals g;
  std::vector<std::string> inputs;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train the configured models and write checkpoints"},
      {"attack", "evaluate the configured attacks, write reports and the pointwise table"},
      {"curve", "robustness curves over the epsilon grid"},
      {"heatmap", "transfer heatmap between the configured models"},
      {"defend", "apply or train the configured defense and evaluate it"},
      {"cam", "class activation maps and RoI concentration"},
      {"bench", "packed vs float GEMM throughput"},
      {"report", "merge report JSON files"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    if (name == "report") {
      sub->add_option("inputs", inputs, "report files")->required()->check(CLI::ExistingFile);
    } else {
      auto* c = sub->add_option("--config,-c", g.config, "experiment config (JSON)")->check(CLI::ExistingFile);
      if (name != "bench") c->required();
      sub->add_option("--seed", g.seed, "top-level seed, overrides the config");
      sub->add_option("--workers,-j", g.workers, "worker threads for per-image attack loops (0 = all cores)");
      sub->add_flag("--deterministic", g.deterministic, "single worker, no wall-clock output");
    }
    sub->add_option("--out,-o", g.out, "output directory, overrides the config");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, g, inputs);
  } catch (const arbb::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

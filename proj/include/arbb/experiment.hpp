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

#ifndef ARBB_EXPERIMENT_HPP
#define ARBB_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arbb/attacks.hpp"
#include "arbb/dataset.hpp"
#include "arbb/defenses.hpp"
#include "arbb/model.hpp"
#include "arbb/train.hpp"

namespace arbb {

struct DatasetBlock {
  std::string source = "synthetic";  // synthetic | cifar10 | blob
  std::filesystem::path path;        // cifar10 directory or eval blob manifest
  std::filesystem::path train_path;  // blob manifest of the training split
  std::size_t train_limit = 0;       // 0 = whole training split
  std::size_t subsample = 0;         // evaluation images, 0 = all
  SynthSpec synth;
  std::size_t train_per_class = 60;
  std::size_t test_per_class = 10;
};

struct ModelBlock {
  std::string name = "model";
  ModelConfig config;
  // Taken from the dataset when not given.
  std::optional<std::size_t> num_classes, in_channels, resolution;
  std::filesystem::path checkpoint;  // empty = <output>/<name>.ckpt

  ModelConfig resolved(const Dataset& ds) const;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetBlock dataset;
  ModelBlock model;
  std::vector<ModelBlock> models;  // several models: pointwise tables, heatmaps
  TrainConfig train;
  std::vector<AttackSpec> attacks;
  std::optional<DefenseSpec> defense;
  std::vector<double> grid = {0.0, 0.01, 0.03, 0.06};
  std::size_t cam_images = 8;
  double cam_threshold = 0.5;
  std::vector<std::size_t> bench_sizes = {64, 512, 4096};
  std::size_t bench_rows = 128;
  std::size_t bench_cols = 128;
  std::size_t bench_repeats = 3;
  std::filesystem::path output = "out";
  std::string raw_json = "{}";  // the config text as parsed, for the report echo

  // Re-derives every component seed from the top-level seed.
  void apply_seed(std::uint64_t s);
  // `models` when given, otherwise the single `model`.
  std::vector<ModelBlock> targets() const { return models.empty() ? std::vector<ModelBlock>{model} : models; }
};

// Strict parser: unknown keys, wrong types and invalid values raise
// ConfigError naming the offending key path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Splits {
  Dataset train;
  Dataset eval;
};
Splits load_splits(const ExperimentConfig& cfg, bool need_train);

std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, const ModelBlock& m);

struct RunOptions {
  std::size_t workers = 1;
  bool deterministic = false;
};

// Commands. Each writes its artifacts under cfg.output and returns the
// process exit code (0 iff every requested artifact was written).
int cmd_train(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_attack(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_curve(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_heatmap(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_defend(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_cam(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_bench(const ExperimentConfig& cfg, const RunOptions& opt);
int cmd_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace arbb

#endif  // ARBB_EXPERIMENT_HPP

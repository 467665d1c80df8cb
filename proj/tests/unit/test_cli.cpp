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

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "arbb/experiment.hpp"
#include "arbb/report.hpp"
#include "arbb/rng.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace arbb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "arbb_test_cli";

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE_MESSAGE(f.good(), "missing " << p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ARBB_CLI_PATH) + " " + args + " > " + (kRoot / "stdout.txt").string() + " 2> " +
                          (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json tiny_config() {
  return json::parse(R"({
    "seed": 5,
    "dataset": {"source": "synthetic", "train_per_class": 20, "test_per_class": 4,
                "synthetic": {"num_classes": 3}},
    "models": [{"name": "fp", "scheme": "fp32"}, {"name": "bnn", "scheme": "bnn"}],
    "train": {"epochs": 2, "batch_size": 16, "milestones": []},
    "attacks": [{"method": "fgsm"}, {"method": "pgd", "iterations": 3}],
    "cam": {"images": 2},
    "bench": {"sizes": [64], "rows": 8, "cols": 8, "repeats": 1}
  })");
}

fs::path write_config(const json& j, const std::string& name) {
  fs::create_directories(kRoot);
  const fs::path p = kRoot / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

bool throws_config_naming(const std::string& text, const std::string& key) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return std::string(e.what()).find(key) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("config parsing is strict") {
  CHECK(throws_config_naming(R"({"sed": 1})", "sed"));
  CHECK(throws_config_naming(R"({"train": {"epochs": 1, "lr_sched": 2}})", "train.lr_sched"));
  CHECK(throws_config_naming(R"({"attacks": [{"method": "pgd", "eps": 0.1}]})", "attacks[0].eps"));
  CHECK(throws_config_naming(R"({"train": {"epochs": "ten"}})", "train.epochs"));
  CHECK(throws_config_naming(R"({"attacks": [{"method": "lbfgs"}]})", "attacks[0].method"));
  CHECK(throws_config_naming(R"({"attacks": [{"method": "pgd", "epsilon": -1}]})", "attacks[0]"));
  CHECK(throws_config_naming(R"({"dataset": {"source": "mnist"}})", "dataset.source"));
  CHECK(throws_config_naming(R"({"model": {"name": "a"}, "models": []})", "model"));
  CHECK(throws_config_naming(R"({"curve": {"grid": [0.01]}})", "curve.grid"));
  CHECK(throws_config_naming(R"({"curve": {"grid": [0, 0.03, 0.03]}})", "curve.grid"));
  CHECK(throws_config_naming(R"({"defense": {"method": "jpeg", "quality": 0}})", "defense"));
  CHECK(throws_config_naming("{", "JSON"));

  const ExperimentConfig c = parse_config(tiny_config().dump());
  CHECK(c.models.size() == 2);
  CHECK(c.attacks[1].iterations == 3);
  CHECK(c.attacks[0].epsilon == 0.03);
  CHECK(c.targets().size() == 2);
}

TEST_CASE("shipped configs parse") {
  const fs::path dir = fs::path(ARBB_SOURCE_DIR) / "configs";
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    CAPTURE(e.path());
    CHECK_NOTHROW(load_config(e.path()));
    ++n;
  }
  CHECK(n >= 2);
}

TEST_CASE("seed derivation") {
  ExperimentConfig c = parse_config(tiny_config().dump());
  CHECK(c.seed == 5);
  CHECK(c.train.seed == derive_seed(5, "train"));
  CHECK(c.dataset.synth.seed == derive_seed(5, "dataset"));
  CHECK(c.attacks[1].seed == derive_seed(5, "attack", 1));
  CHECK(c.attacks[0].seed != c.attacks[1].seed);
  c.apply_seed(6);
  CHECK(c.train.seed == derive_seed(6, "train"));
  CHECK(json::parse(c.raw_json).at("seed") == 6);
}

TEST_CASE("missing dataset path is a config error") {
  json j = tiny_config();
  j["dataset"] = {{"source", "cifar10"}, {"path", (kRoot / "no_such_dir").string()}};
  const auto cfg = write_config(j, "missing.json");
  CHECK(run_cli("train --config " + cfg.string() + " --out " + (kRoot / "missing").string()) == 2);
  CHECK(slurp(kRoot / "stderr.txt").find("no_such_dir") != std::string::npos);
}

TEST_CASE("end to end on synthetic data") {
  fs::remove_all(kRoot);
  const auto cfg = write_config(tiny_config(), "tiny.json");
  const fs::path a = kRoot / "a", b = kRoot / "b";

  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " + a.string()) == 0);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(60));
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " + b.string()) == 0);
  for (const char* f : {"fp.ckpt", "bnn.ckpt", "fp_history.csv", "bnn_history.csv"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }

  SUBCASE("attack report") {
    REQUIRE(run_cli("attack --config " + cfg.string() + " --out " + a.string() + " --workers 1") == 0);
    const RobustnessReport r = report_from_json(slurp(a / "report_bnn.json"));
    CHECK(r.attacks.size() == 2);
    REQUIRE(r.family_rs.size() == 1);
    CHECK(r.family_rs[0].second == doctest::Approx((r.attacks[0].acc_norm + r.attacks[1].acc_norm) / 2));
    CHECK(json::parse(r.config_json) == json::parse(tiny_config().dump()));
    const std::string table = slurp(a / "pointwise.csv");
    CHECK(table.rfind("attack,family,fp,bnn\n", 0) == 0);

    // Worker count must not change any artifact.
    const fs::path c = kRoot / "c";
    fs::create_directories(c);
    fs::copy_file(a / "fp.ckpt", c / "fp.ckpt");
    fs::copy_file(a / "bnn.ckpt", c / "bnn.ckpt");
    REQUIRE(run_cli("attack --config " + cfg.string() + " --out " + c.string() + " --workers 3") == 0);
    for (const char* f : {"report_fp.json", "report_bnn.json", "pointwise.csv"}) CHECK_MESSAGE(slurp(a / f) == slurp(c / f), f);
  }
  SUBCASE("empty attack list") {
    json j = tiny_config();
    j.erase("attacks");
    const auto cfg2 = write_config(j, "noattacks.json");
    REQUIRE(run_cli("attack --config " + cfg2.string() + " --out " + a.string()) == 0);
    const RobustnessReport r = report_from_json(slurp(a / "report_fp.json"));
    CHECK(r.attacks.empty());
    CHECK(r.family_rs.empty());
    CHECK(r.clean_acc > 0.0);
  }
  SUBCASE("curve with a zero-only grid") {
    json j = tiny_config();
    j["curve"] = {{"grid", {0.0}}};
    const auto cfg2 = write_config(j, "curve0.json");
    REQUIRE(run_cli("curve --config " + cfg2.string() + " --out " + a.string()) == 0);
    CHECK(slurp(a / "curve_bnn_pgd_linf.csv") == "eps,acc_norm\n0.000000,1.000000\n");
  }
  SUBCASE("heatmap") {
    REQUIRE(run_cli("heatmap --config " + cfg.string() + " --out " + a.string()) == 0);
    std::istringstream csv(slurp(a / "heatmap.csv"));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == ",fp,bnn");
    for (const auto& l : lines) CHECK(std::count(l.begin(), l.end(), ',') == 2);
    CHECK(lines[1].rfind("fp,", 0) == 0);
  }
  SUBCASE("transform defense") {
    json j = tiny_config();
    j["defense"] = {{"method", "bit-red"}};
    const auto cfg2 = write_config(j, "bitred.json");
    REQUIRE(run_cli("defend --config " + cfg2.string() + " --out " + a.string()) == 0);
    const std::string csv = slurp(a / "defense_bit-red.csv");
    CHECK(csv.rfind("model,attack,norm,epsilon,undefended,defended\n", 0) == 0);
    CHECK(fs::exists(a / "report_bnn_bit-red.json"));
  }
  SUBCASE("cam, bench and report merge") {
    REQUIRE(run_cli("cam --config " + cfg.string() + " --out " + a.string()) == 0);
    const json cam = json::parse(slurp(a / "cam_bnn.json"));
    CHECK(cam.at("maps").size() == 2);
    REQUIRE(run_cli("bench --config " + cfg.string() + " --deterministic --out " + a.string()) == 0);
    CHECK(slurp(a / "bench.csv") == "rows,inner,cols,exact\n8,64,8,1\n");
    REQUIRE(run_cli("attack --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run_cli("report " + (a / "report_fp.json").string() + " " + (a / "report_bnn.json").string() + " --out " +
                    a.string()) == 0);
    CHECK(json::parse(slurp(a / "merged_report.json")).at("reports").size() == 2);
  }
  SUBCASE("attacking without a checkpoint") {
    CHECK(run_cli("attack --config " + cfg.string() + " --out " + (kRoot / "empty").string()) == 2);
  }
}

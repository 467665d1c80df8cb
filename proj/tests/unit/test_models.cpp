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

#include <fstream>
#include <map>

#include "arbb/checkpoint.hpp"
#include "doctest.h"
#include "support/support.hpp"

using namespace arbb;

namespace {

std::map<std::string, Shape> shapes(const Model& m) {
  std::map<std::string, Shape> out;
  for (const auto& p : m.parameters()) out[p.name] = p.value.shape();
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("smallcnn parameter count") {
  // stem 3->16, layer1 16->32, layer2 32->64, all 3x3; batch norm gamma+beta
  // per channel; PReLU slopes per channel (FP32 only); head 64->10 + bias.
  const std::size_t convs = 16 * 3 * 9 + 32 * 16 * 9 + 64 * 32 * 9;
  const std::size_t bn = 2 * (16 + 32 + 64);
  const std::size_t head = 64 * 10 + 10;
  CHECK(Model(test::desk_config(SchemeId::FP32)).parameter_count() == convs + bn + (16 + 32 + 64) + head);
  CHECK(Model(test::desk_config(SchemeId::BNN)).parameter_count() == convs + bn + head);
  CHECK(convs + bn + 112 + head == 24458);
}

TEST_CASE("width scaling rounds channel counts up") {
  ModelConfig full = test::desk_config(SchemeId::BNN, Architecture::ResNet18);
  full.resolution = 32;
  ModelConfig quarter = full;
  quarter.width = Width::parse("1/4");
  const auto a = shapes(Model(full)), b = shapes(Model(quarter));
  REQUIRE(a.size() == b.size());
  auto ceil4 = [](std::size_t c) { return (c + 3) / 4; };
  for (const auto& [name, s] : a) {
    const Shape& q = b.at(name);
    if (name.find("conv.weight") != std::string::npos) {
      CHECK(q[0] == ceil4(s[0]));
      CHECK(q[1] == (name.rfind("stem", 0) == 0 ? s[1] : ceil4(s[1])));
    } else if (name == "head.weight") {
      CHECK(q[1] == ceil4(s[1]));
    }
  }
  CHECK(Width::parse("3/8").apply(3) == 2);
  CHECK(Width::parse("1/8").apply(4) == 1);
  CHECK_THROWS_AS(Width::parse("0/1"), ConfigError);
}

TEST_CASE("width-scaled models keep valid forward shapes") {
  Rng rng(1);
  for (Architecture arch : {Architecture::SmallCNN, Architecture::SmallResNet, Architecture::ResNet18}) {
    for (const char* w : {"1", "1/2", "1/4", "1/8"}) {
      ModelConfig mc = test::desk_config(SchemeId::ReActNet, arch);
      mc.width = Width::parse(w);
      const Model m(mc, 2);
      CHECK(m.logits(test::random_tensor({2, 3, 16, 16}, rng, 0, 1)).shape() == Shape{2, 10});
    }
  }
}

TEST_CASE("any-spatial inputs of odd intermediate size") {
  Rng rng(6);
  for (Architecture arch : {Architecture::SmallCNN, Architecture::SmallResNet, Architecture::ResNet18}) {
    const Model m(test::desk_config(SchemeId::BNN, arch), 2);
    for (std::size_t side : {17, 18, 19, 24}) {
      CAPTURE(side);
      const Tensor x = test::random_tensor({1, 3, side, side}, rng, 0, 1);
      CHECK(m.logits(x, InputCheck::AnySpatial).shape() == Shape{1, 10});
    }
    CHECK_THROWS_AS(m.logits(test::random_tensor({1, 3, 18, 18}, rng, 0, 1)), ShapeError);
  }
}

TEST_CASE("FP32 graphs contain no sign nodes; binary ones do") {
  Rng rng(2);
  const Tensor x = test::random_tensor({1, 3, 16, 16}, rng, 0, 1);
  for (SchemeId s : kAllSchemes) {
    const Model m(test::desk_config(s, Architecture::SmallResNet), 1);
    Graph<float> g;
    m.forward(g, g.constant(x));
    if (s == SchemeId::FP32) {
      CHECK(g.count_ops("sign") == 0);
    } else {
      CHECK(g.count_ops("sign") > 0);
    }
  }
}

TEST_CASE("packed inference equals the float path and eval is pure") {
  Rng rng(3);
  const Tensor x = test::random_tensor({3, 3, 16, 16}, rng, 0, 1);
  for (SchemeId s : kAllSchemes) {
    Model m(test::desk_config(s, Architecture::SmallResNet), 4);
    m.set_packed_inference(true);
    const Tensor packed = m.logits(x);
    CHECK(packed == m.logits(x));
    m.set_packed_inference(false);
    CHECK(packed == m.logits(x));
  }
}

TEST_CASE("training") {
  SUBCASE("two-class blobs reach high train accuracy") {
    const auto d = test::desk_data(5, 50, 10, 2);
    Model m(test::desk_config(SchemeId::BNN, Architecture::SmallCNN, 2), 1);
    const auto h = train(m, d.train, test::desk_train(5));
    REQUIRE(h.epochs.size() == 5);
    CHECK(h.epochs.back().train_accuracy > 0.9);
  }
  SUBCASE("lr 0 leaves parameters unchanged") {
    const auto d = test::desk_data(5, 10, 2, 4);
    Model m(test::desk_config(SchemeId::XNOR, Architecture::SmallCNN, 4), 1);
    const Model before = m;
    TrainConfig tc = test::desk_train(2);
    tc.lr = 0.0;
    const auto h = train(m, d.train, tc);
    for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(m.parameters()[i].value == before.parameters()[i].value);
    CHECK(h.epochs[0].lr == 0.0);
    CHECK(h.epochs[1].lr == 0.0);
  }
  SUBCASE("fixed seed is deterministic") {
    const auto d = test::desk_data(6, 10, 2, 4);
    Model a(test::desk_config(SchemeId::ReCU, Architecture::SmallCNN, 4), 1), b = a;
    train(a, d.train, test::desk_train(2));
    train(b, d.train, test::desk_train(2));
    CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  }
  SUBCASE("divergence names the epoch") {
    const auto d = test::desk_data(6, 10, 2, 4);
    Model m(test::desk_config(SchemeId::FP32, Architecture::SmallCNN, 4), 1);
    TrainConfig tc = test::desk_train(3);
    tc.optimizer = OptimizerId::SGD;
    tc.lr = 1e30;
    try {
      train(m, d.train, tc);
      FAIL("expected a training error");
    } catch (const TrainingError& e) {
      CHECK(e.epoch() >= 0);
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
  SUBCASE("label range is checked") {
    const auto d = test::desk_data(6, 10, 2, 4);
    Model m(test::desk_config(SchemeId::FP32, Architecture::SmallCNN, 3), 1);
    CHECK_THROWS_AS(train(m, d.train, test::desk_train(1)), LabelError);
  }
}

TEST_CASE("training loss decreases over the first epochs") {
  const auto d = test::desk_data(9, 20, 1, 10);
  int decreasing = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Model m(test::desk_config(SchemeId::BNN), seed);
    TrainConfig tc = test::desk_train(3);
    tc.seed = seed;
    const auto h = train(m, d.train, tc);
    decreasing += (h.epochs[1].train_loss < h.epochs[0].train_loss && h.epochs[2].train_loss < h.epochs[1].train_loss);
  }
  CHECK(decreasing >= 19);
}

TEST_CASE("training recipes") {
  const TrainConfig c = TrainConfig::cifar_recipe();
  CHECK(c.epochs == 80);
  CHECK(c.optimizer == OptimizerId::Adam);
  CHECK(c.schedule == ScheduleId::MultiStep);
  CHECK(c.milestones == std::vector<std::size_t>{50, 75});
  CHECK(c.lr == 1e-3);
  CHECK(c.lr_at(49) == doctest::Approx(1e-3));
  CHECK(c.lr_at(50) == doctest::Approx(1e-4));
  CHECK(c.lr_at(75) == doctest::Approx(1e-5));
  const TrainConfig i = TrainConfig::imagenet_recipe();
  CHECK(i.epochs == 120);
  CHECK(i.optimizer == OptimizerId::SGD);
  CHECK(i.schedule == ScheduleId::Cosine);
  CHECK(i.lr == 0.1);
  CHECK(i.lr_at(0) < i.lr_at(9));
  CHECK(i.lr_at(119) < i.lr_at(60));
  TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoints") {
  const auto dir = std::filesystem::temp_directory_path() / "arbb_test_models";
  std::filesystem::create_directories(dir);
  const auto d = test::desk_data(2, 10, 2, 4);
  Model m(test::desk_config(SchemeId::ReActNet, Architecture::SmallResNet, 4), 8);
  train(m, d.train, test::desk_train(1));
  const auto path = dir / "m.ckpt";
  save_checkpoint(m, path);
  const Model back = load_checkpoint(path);
  REQUIRE(back.parameters().size() == m.parameters().size());
  for (std::size_t i = 0; i < m.parameters().size(); ++i) CHECK(back.parameters()[i].value == m.parameters()[i].value);
  const auto bufs_a = m.buffers();
  const auto bufs_b = back.buffers();
  for (std::size_t i = 0; i < bufs_a.size(); ++i) CHECK(bufs_a[i].buffers->running_var == bufs_b[i].second->running_var);
  CHECK(back.logits(d.test.images) == m.logits(d.test.images));
  CHECK(back.config().scheme == SchemeId::ReActNet);

  const auto bytes = read_bytes(path);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ARBB");
  SUBCASE("truncation") {
    for (std::size_t cut : {std::size_t{2}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
      CHECK_THROWS_AS(deserialize_checkpoint(std::span(bytes.data(), cut)), FormatError);
    }
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    try {
      deserialize_checkpoint(b);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("version bump") {
    auto b = bytes;
    b[4] = 2;
    try {
      deserialize_checkpoint(b);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
      CHECK(std::string(e.what()).find("version 2") != std::string::npos);
    }
  }
  SUBCASE("trailing bytes") {
    auto b = bytes;
    b.push_back(0);
    CHECK_THROWS_AS(deserialize_checkpoint(b), FormatError);
  }
  std::filesystem::remove_all(dir);
}

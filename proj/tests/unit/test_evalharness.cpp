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
#include <fstream>
#include <set>

#include "arbb/evaluation.hpp"
#include "arbb/report.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/support.hpp"

using namespace arbb;

namespace {

const std::filesystem::path kTmp = std::filesystem::temp_directory_path() / "arbb_test_evalharness";

void write_records(const std::filesystem::path& p, const std::vector<std::vector<std::uint8_t>>& records) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  for (const auto& r : records) f.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(r.size()));
}

std::vector<std::uint8_t> record(std::uint8_t label, std::uint8_t fill) {
  std::vector<std::uint8_t> r(3073, fill);
  r[0] = label;
  return r;
}

// Predicts class 0 for everything.
AffineClassifier constant_model(const Shape& image, std::size_t K) {
  Tensor b({K});
  b[0] = 1.0f;
  return AffineClassifier(image, Tensor({K, numel(image)}), b);
}

}  // namespace

TEST_CASE("normalized accuracy and robustness score") {
  CHECK(acc_norm(0.45, 0.90) == doctest::Approx(0.5));
  CHECK(acc_norm(0.7, 0.7) == 1.0);
  CHECK_THROWS_AS(acc_norm(0.0, 0.0), MetricError);

  // White-box ACC_norm columns (percent) for two models and their published scores.
  const std::vector<double> bnn{37.66, 2.83, 9.45, 11.35, 21.38};
  const std::vector<double> fp32{56.68, 7.87, 36.97, 25.17, 34.11};
  CHECK(std::round(robustness_score(bnn) * 100.0) / 100.0 == doctest::Approx(16.53));
  CHECK(std::round(robustness_score(fp32) * 100.0) / 100.0 == doctest::Approx(32.16));
  const std::vector<double> one{0.42};
  CHECK(robustness_score(one) == 0.42);
  CHECK_THROWS_AS(robustness_score({}), ConfigError);
}

TEST_CASE("cifar-10 binary reader") {
  std::filesystem::remove_all(kTmp);
  const auto dir = kTmp / "cifar";
  write_records(dir / "test_batch.bin", {record(3, 255), record(9, 0), record(0, 128)});
  const Dataset ds = load_cifar10(dir, "test");
  REQUIRE(ds.size() == 3);
  CHECK(ds.images.shape() == Shape{3, 3, 32, 32});
  CHECK(ds.labels == std::vector<int>{3, 9, 0});
  CHECK(ds.images[0] == 1.0f);
  CHECK(ds.images[3072] == 0.0f);
  CHECK(ds.images[2 * 3072] == doctest::Approx(128.0 / 255.0));
  CHECK(ds.num_classes() == 10);
  CHECK(load_cifar10(dir, "test", 2).size() == 2);
  CHECK_THROWS_AS(load_cifar10(dir, "train"), ConfigError);
  CHECK_THROWS_AS(load_cifar10(dir, "valid"), ConfigError);

  SUBCASE("wrong length names both counts") {
    auto r = record(1, 7);
    r.pop_back();
    write_records(dir / "short.bin", {record(1, 7), r});
    try {
      load_cifar10_file(dir / "short.bin");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      const std::string what = e.what();
      CHECK(what.find("6145") != std::string::npos);
      CHECK(what.find("6146") != std::string::npos);
    }
  }
  SUBCASE("label byte out of range") {
    write_records(dir / "bad.bin", {record(1, 7), record(10, 7)});
    try {
      load_cifar10_file(dir / "bad.bin");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 3073);
    }
  }
  std::filesystem::remove_all(kTmp);
}

TEST_CASE("subsample") {
  const auto d = test::desk_data(1, 5, 1, 4);
  const Dataset a = subsample(d.train, 20, 7), b = subsample(d.train, 20, 7);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  std::multiset<int> all(d.train.labels.begin(), d.train.labels.end()), got(a.labels.begin(), a.labels.end());
  CHECK(all == got);
  CHECK_FALSE(subsample(d.train, 20, 8).labels == a.labels);
  CHECK(subsample(d.train, 3, 7).size() == 3);
  CHECK_THROWS_AS(subsample(d.train, 21, 7), ConfigError);
}

TEST_CASE("synthetic data") {
  SynthSpec s;
  s.num_classes = 2;
  s.per_class = 100;
  s.seed = 4;
  const Dataset a = synth_dataset(s), b = synth_dataset(s);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK(test::in_box(a.images, 0.0));
  CHECK(a.size() == 200);
  a.validate();

  // Perceptron over raw pixels plus bias: separable data converges to zero
  // training errors.
  const std::size_t D = numel(a.image_shape());
  std::vector<double> w(D + 1, 0.0);
  std::size_t errors = 1;
  for (int epoch = 0; epoch < 1000 && errors > 0; ++epoch) {
    errors = 0;
    for (std::size_t n = 0; n < a.size(); ++n) {
      const double t = a.labels[n] == 1 ? 1.0 : -1.0;
      double s2 = w[D];
      for (std::size_t i = 0; i < D; ++i) s2 += w[i] * a.images[n * D + i];
      if (t * s2 <= 0.0) {
        ++errors;
        for (std::size_t i = 0; i < D; ++i) w[i] += t * a.images[n * D + i];
        w[D] += t;
      }
    }
  }
  CHECK(errors == 0);

  SynthSpec bad = s;
  bad.amplitude = 0.5;
  CHECK_THROWS_AS(synth_dataset(bad), ConfigError);
}

TEST_CASE("tensor blob round trip") {
  const auto d = test::desk_data(2, 2, 1, 3);
  const auto manifest = kTmp / "blob" / "set.json";
  std::filesystem::create_directories(manifest.parent_path());
  save_tensor_blob(d.train, manifest);
  const Dataset back = load_tensor_blob(manifest);
  CHECK(back.images == d.train.images);
  CHECK(back.labels == d.train.labels);
  CHECK(back.class_names == d.train.class_names);
  std::filesystem::resize_file(std::filesystem::path(manifest).replace_extension(".bin"), 12);
  CHECK_THROWS_AS(load_tensor_blob(manifest), FormatError);
  std::filesystem::remove_all(kTmp);
}

TEST_CASE("imagenet-10 class map") {
  const auto& m = imagenet10_classmap();
  CHECK(m.size() == 10);
  const auto& fish = m.at("fish");
  CHECK(std::find(fish.begin(), fish.end(), "n01443537") != fish.end());
  std::set<std::string> all;
  for (const auto& [coarse, ids] : m) {
    CHECK(ids.size() == 5);
    all.insert(ids.begin(), ids.end());
  }
  CHECK(all.size() == 50);
  CHECK(imagenet10_coarse_label("n01443537") == std::optional<std::string>("fish"));
  CHECK_FALSE(imagenet10_coarse_label("n99999999").has_value());
  const auto settings = imagenet10_ablation_settings();
  std::set<std::size_t> counts;
  for (const auto& a : settings) counts.insert(a.images_per_class);
  CHECK(counts == std::set<std::size_t>{1200, 3000, 6000});
}

TEST_CASE("clean accuracy") {
  const auto d = test::desk_data(3, 1, 10, 10);
  CHECK(clean_accuracy(constant_model(d.test.image_shape(), 10), d.test) == doctest::Approx(0.1));
  CHECK(clean_accuracy(constant_model(d.test.image_shape(), 10), d.test, 7) == doctest::Approx(0.1));
  Dataset empty;
  empty.class_names = d.test.class_names;
  CHECK_THROWS_AS(clean_accuracy(constant_model(d.test.image_shape(), 10), empty), MetricError);
}

TEST_CASE("adversarial accuracy") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::FP32, d);
  const ModelClassifier clf(m);
  const double acc = clean_accuracy(clf, d.test);
  REQUIRE(acc > 0.5);

  AttackSpec zero = AttackSpec::defaults(AttackId::FGSM);
  zero.epsilon = 0.0;
  const AttackEval e0 = evaluate_attack(clf, d.test, zero);
  CHECK(e0.acc == acc);
  CHECK(e0.acc_star == acc);
  CHECK(e0.acc_norm == 1.0);

  // An oracle attack that always succeeds at norm 0.
  std::vector<AdvResult> always(d.test.size());
  for (auto& r : always) r.success = true;
  const auto mask = correct_mask(clf, d.test);
  AttackSpec mn = AttackSpec::defaults(AttackId::DeepFool);
  CHECK(adversarial_accuracy(clf, d.test, always, mn, mask) == 0.0);

  double prev = 1.0;
  for (double eps : {0.0, 0.01, 0.03, 0.06}) {
    AttackSpec p = AttackSpec::defaults(AttackId::PGD);
    p.epsilon = eps;
    p.seed = 2;
    const double a = evaluate_attack(clf, d.test, p).acc_star;
    CHECK(a <= prev);
    prev = a;
  }
}

TEST_CASE("robustness curves") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::FP32, d);
  const ModelClassifier clf(m);
  const std::vector<double> grid{0.0, 0.01, 0.03, 0.06, 0.3};
  const Curve f = robustness_curve(clf, d.test, AttackSpec::defaults(AttackId::FGSM), grid);
  REQUIRE(f.points.size() == grid.size());
  CHECK(f.points[0].eps == 0.0);
  CHECK(f.points[0].acc_norm == 1.0);
  for (std::size_t i = 1; i < f.points.size(); ++i) CHECK(f.points[i].acc_norm <= f.points[i - 1].acc_norm);
  // Large budgets drift toward random guessing.
  const double acc = clean_accuracy(clf, d.test);
  CHECK(std::abs(f.points.back().acc_norm - 0.1 / acc) <= 0.15);
  CHECK(f.csv().rfind("eps,acc_norm\n0.000000,1.000000\n", 0) == 0);

  AttackSpec df = AttackSpec::defaults(AttackId::DeepFool);
  const Curve c = robustness_curve(clf, d.test, df, grid);
  CHECK(c.points[0].acc_norm == 1.0);
  for (std::size_t i = 1; i < c.points.size(); ++i) CHECK(c.points[i].acc_norm <= c.points[i - 1].acc_norm);

  const std::vector<double> bad{0.01, 0.03};
  CHECK_THROWS_AS(robustness_curve(clf, d.test, df, bad), ConfigError);
  const std::vector<double> unsorted{0.0, 0.03, 0.01};
  CHECK_THROWS_AS(robustness_curve(clf, d.test, df, unsorted), ConfigError);
}

TEST_CASE("pointwise table") {
  const auto d = test::desk_data();
  const Model m = test::desk_model(SchemeId::FP32, d);
  const ModelClassifier clf(m);
  const Dataset small = subset(d.test, std::vector<std::size_t>{0, 10, 20, 30, 40, 50, 60, 70, 80, 90});
  const std::vector<NamedClassifier> models{{"fp32", &clf}};
  SUBCASE("one model, one attack") {
    const std::vector<AttackSpec> attacks{AttackSpec::defaults(AttackId::FGSM)};
    const auto t = pointwise_table(models, small, attacks);
    REQUIRE(t.acc_norm.size() == 1);
    REQUIRE(t.rs.size() == 1);
    CHECK(t.rs[0][0] == t.acc_norm[0][0]);
    CHECK(t.rs_families[0] == "white-box");
  }
  SUBCASE("family scores are means of their rows") {
    AttackSpec pgd = AttackSpec::defaults(AttackId::PGD);
    pgd.iterations = 5;
    const std::vector<AttackSpec> attacks{AttackSpec::defaults(AttackId::FGSM), pgd};
    const auto t = pointwise_table(models, small, attacks);
    CHECK(t.rs[0][0] == doctest::Approx((t.acc_norm[0][0] + t.acc_norm[1][0]) / 2));
    const std::string csv = t.csv();
    CHECK(csv.rfind("attack,family,fp32\n", 0) == 0);
    CHECK(csv.find("RS,white-box,") != std::string::npos);
  }
  CHECK(AttackSpec::defaults(AttackId::PGD, NormKind::Linf).epsilon == 0.03);
  CHECK(AttackSpec::defaults(AttackId::PGD, NormKind::L2).epsilon == 0.5);
}

TEST_CASE("transfer heatmap") {
  const auto d = test::desk_data();
  const Model a = test::desk_model(SchemeId::FP32, d), b = test::desk_model(SchemeId::BNN, d);
  const ModelClassifier ca(a), cb(b);
  const Dataset small = subset(d.test, std::vector<std::size_t>{0, 11, 22, 33, 44, 55, 66, 77, 88, 99});
  const AttackSpec sini = AttackSpec::defaults(AttackId::SINIFGSM);
  const std::vector<NamedClassifier> one{{"fp32", &ca}};
  const Heatmap h1 = transfer_heatmap(one, small, sini);
  CHECK(h1.values[0][0] == evaluate_attack(ca, small, sini).acc_norm);
  const std::vector<NamedClassifier> two{{"fp32", &ca}, {"bnn", &cb}};
  const Heatmap h = transfer_heatmap(two, small, sini);
  REQUIRE(h.values.size() == 2);
  for (const auto& row : h.values) {
    REQUIRE(row.size() == 2);
    for (double v : row) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(h.csv().rfind(",fp32,bnn\nfp32,", 0) == 0);
}

TEST_CASE("class activation maps") {
  SUBCASE("uniform features give an all-zero map") {
    const Tensor f({2, 3, 3}, 0.7f);
    const std::vector<float> w{1.0f, -2.0f};
    const Tensor cam = cam_from_features(f, w, 6, 6);
    CHECK(cam.shape() == Shape{6, 6});
    for (float v : cam.data()) CHECK(v == 0.0f);
  }
  SUBCASE("single channel with positive weight is the normalized feature") {
    const Tensor f({1, 2, 2}, std::vector<float>{1, 3, 5, 9});
    const std::vector<float> w{2.5f};
    const Tensor cam = cam_from_features(f, w, 2, 2);
    CHECK(cam == Tensor({2, 2}, std::vector<float>{0.0f, 0.25f, 0.5f, 1.0f}));
    const Tensor up = cam_from_features(f, w, 4, 4);
    CHECK(up[0] == 0.0f);
    CHECK(up[1] == 0.0f);
    CHECK(up[15] == 1.0f);
  }
  SUBCASE("head mismatch") {
    const std::vector<float> w{1.0f};
    CHECK_THROWS_AS(cam_from_features(Tensor({2, 2, 2}), w, 2, 2), ArchitectureError);
  }
  SUBCASE("model maps") {
    const auto d = test::desk_data();
    const Model m = test::desk_model(SchemeId::BNN, d);
    const Tensor cam = compute_cam(m, d.test.image(0), d.test.labels[0]);
    CHECK(cam.shape() == Shape{16, 16});
    CHECK(test::in_box(cam, 0.0));
    CHECK_THROWS_AS(compute_cam(m, d.test.image(0), 10), LabelError);
  }
  SUBCASE("roi concentration") {
    CHECK(roi_concentration(Tensor({4, 4})) == 0.0);
    CHECK(roi_concentration(Tensor({4, 4}, 1.0f)) == 1.0);
    Tensor half({4, 4});
    for (std::size_t i = 0; i < 8; ++i) half[i] = 0.9f;
    CHECK(roi_concentration(half) == 0.5);
  }
}

TEST_CASE("report json") {
  RobustnessReport r;
  r.model = "bnn";
  r.clean_acc = 0.875;
  r.seed = 42;
  r.config_json = R"({"seed": 42, "b": [1, 2]})";
  AttackEval ev;
  ev.spec = AttackSpec::defaults(AttackId::PGD);
  ev.acc = 0.875;
  ev.acc_star = 0.1;
  ev.acc_norm = 0.1 / 0.875;
  ev.images = 8;
  r.attacks.push_back(attack_entry(ev));
  ev.spec = AttackSpec::defaults(AttackId::Square);
  ev.acc_star = 0.3;
  ev.acc_norm = 0.3 / 0.875;
  ev.max_queries = 5000;
  r.attacks.push_back(attack_entry(ev));
  ev.spec = AttackSpec::defaults(AttackId::FGSM);
  ev.acc_norm = 0.5;
  r.attacks.push_back(attack_entry(ev));
  r.update_family_rs();
  REQUIRE(r.family_rs.size() == 2);
  CHECK(r.family_rs[0].first == "white-box");
  CHECK(r.family_rs[0].second == doctest::Approx((0.1 / 0.875 + 0.5) / 2));
  Curve c;
  c.model = "bnn";
  c.attack = "pgd";
  c.norm = "linf";
  c.points = {{0.0, 1.0}, {0.03, 1.0 / 3.0}};
  r.curves.push_back(c);
  r.heatmap = Heatmap{{"a", "b"}, {{0.1, 0.2}, {0.3, 0.4}}};
  r.failures.push_back("boundary: no start");

  const std::string text = report_to_json(r);
  const RobustnessReport back = report_from_json(text);
  CHECK(report_to_json(back) == text);
  CHECK(back.curves[0].points[1].acc_norm == 1.0 / 3.0);
  CHECK(back.attacks[1].max_queries == 5000);
  CHECK(back.heatmap->values[1][0] == 0.3);
  const std::vector<std::string> both{text, text};
  CHECK(nlohmann::json::parse(merge_report_json(both)).at("reports").size() == 2);
  CHECK_THROWS_AS(report_from_json("{not json"), FormatError);
  r.config_json = "{broken";
  CHECK_THROWS_AS(report_to_json(r), ConfigError);
  CHECK(format_decimal(0.5) == "0.500000");
}

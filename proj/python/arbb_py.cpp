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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "arbb/bitkernel.hpp"
#include "arbb/checkpoint.hpp"
#include "arbb/defenses.hpp"
#include "arbb/evaluation.hpp"
#include "arbb/experiment.hpp"
#include "arbb/report.hpp"

namespace py = pybind11;
using namespace arbb;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Dataset to_dataset(const Array& images, const std::vector<int>& labels, std::size_t num_classes) {
  Dataset ds;
  ds.images = to_tensor(images);
  ds.labels = labels;
  for (std::size_t k = 0; k < num_classes; ++k) ds.class_names.push_back(std::to_string(k));
  ds.validate();
  return ds;
}

AttackSpec make_spec(const std::string& method, const std::string& norm, std::optional<double> epsilon,
                     std::uint64_t seed, std::optional<std::size_t> budget, std::optional<std::size_t> iterations) {
  AttackSpec s = AttackSpec::defaults(parse_attack(method), parse_norm(norm));
  if (epsilon) s.epsilon = *epsilon;
  if (budget) s.budget = *budget;
  if (iterations) s.iterations = *iterations;
  s.seed = seed;
  s.validate();
  return s;
}

int run_command(const std::string& command, const std::filesystem::path& config, std::optional<std::uint64_t> seed,
                std::optional<std::filesystem::path> out, std::size_t workers) {
  ExperimentConfig cfg = load_config(config);
  if (seed) cfg.apply_seed(*seed);
  if (out) cfg.output = *out;
  RunOptions opt;
  opt.workers = workers;
  if (command == "train") return cmd_train(cfg, opt);
  if (command == "attack") return cmd_attack(cfg, opt);
  if (command == "curve") return cmd_curve(cfg, opt);
  if (command == "heatmap") return cmd_heatmap(cfg, opt);
  if (command == "defend") return cmd_defend(cfg, opt);
  if (command == "cam") return cmd_cam(cfg, opt);
  if (command == "bench") return cmd_bench(cfg, opt);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

PYBIND11_MODULE(_arbb, m) {
  m.doc() = "Adversarial robustness benchmark for binarized networks";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<MetricError>(m, "MetricError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<BudgetError>(m, "BudgetError", PyExc_RuntimeError);

  m.def("acc_norm", &acc_norm, py::arg("acc_star"), py::arg("acc"));
  m.def("robustness_score", [](const std::vector<double>& v) { return robustness_score(v); }, py::arg("acc_norms"));
  m.def("derive_seed", [](std::uint64_t seed, const std::string& tag, std::uint64_t index) {
    return derive_seed(seed, tag, index);
  }, py::arg("seed"), py::arg("tag"), py::arg("index") = 0);

  m.def("synth_dataset", [](std::size_t num_classes, std::size_t per_class, std::size_t side, std::uint64_t seed) {
    SynthSpec s;
    s.num_classes = num_classes;
    s.per_class = per_class;
    s.height = s.width = side;
    s.seed = seed;
    const Dataset ds = synth_dataset(s);
    return py::make_tuple(to_array(ds.images), ds.labels);
  }, py::arg("num_classes") = 10, py::arg("per_class") = 100, py::arg("side") = 16, py::arg("seed") = 0,
     "Synthetic blob images [N,3,side,side] in [0,1] and their labels.");
  m.def("load_cifar10", [](const std::filesystem::path& dir, const std::string& split, std::size_t max_records) {
    const Dataset ds = load_cifar10(dir, split, max_records);
    return py::make_tuple(to_array(ds.images), ds.labels);
  }, py::arg("dir"), py::arg("split") = "test", py::arg("max_records") = 0);

  m.def("packed_gemm", [](const Array& a, const Array& w) {
    return to_array(packed_gemm(pack_rows(to_tensor(a)), pack_rows(to_tensor(w)), std::vector<float>{1.0f}));
  }, py::arg("a"), py::arg("w"), "Sign GEMM a @ w.T through the packed xnor/popcount kernel.");
  m.def("jpeg", [](const Array& x, int quality) { return to_array(jpeg_round_trip(to_tensor(x), quality)); },
        py::arg("x"), py::arg("quality") = 75);
  m.def("bit_depth_reduce", [](const Array& x, int bits) { return to_array(bit_depth_reduce(to_tensor(x), bits)); },
        py::arg("x"), py::arg("bits") = 4);

  py::class_<Model>(m, "Model")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(self, p); })
      .def("logits", [](const Model& self, const Array& x) { return to_array(self.logits(to_tensor(x))); })
      .def("predict", [](const Model& self, const Array& x) { return self.predict(to_tensor(x)); })
      .def("accuracy", [](const Model& self, const Array& x, const std::vector<int>& y) {
        return clean_accuracy(ModelClassifier(self), to_dataset(x, y, self.num_classes()));
      })
      .def("attack", [](const Model& self, const Array& x, const std::vector<int>& y, const std::string& method,
                        const std::string& norm, std::optional<double> epsilon, std::uint64_t seed,
                        std::optional<std::size_t> budget, std::optional<std::size_t> iterations) {
        const AttackSpec s = make_spec(method, norm, epsilon, seed, budget, iterations);
        const Dataset ds = to_dataset(x, y, self.num_classes());
        const AttackEval e = evaluate_attack(ModelClassifier(self), ds, s);
        py::dict d;
        d["acc"] = e.acc;
        d["acc_star"] = e.acc_star;
        d["acc_norm"] = e.acc_norm;
        d["images"] = e.images;
        return d;
      }, py::arg("x"), py::arg("y"), py::arg("method"), py::arg("norm") = "linf", py::arg("epsilon") = py::none(),
         py::arg("seed") = 0, py::arg("budget") = py::none(), py::arg("iterations") = py::none(),
         "Runs one attack over a batch; returns clean, adversarial and normalized accuracy.")
      .def_property_readonly("num_classes", &Model::num_classes)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("scheme", [](const Model& self) { return std::string(scheme_name(self.config().scheme)); })
      .def_property_readonly("architecture",
                             [](const Model& self) { return std::string(architecture_name(self.config().architecture)); });

  m.def("run", &run_command, py::arg("command"), py::arg("config"), py::arg("seed") = py::none(),
        py::arg("out") = py::none(), py::arg("workers") = 1,
        "Runs a CLI command on a config file and returns its exit code.");
  m.def("merge_reports", [](const std::vector<std::string>& texts) { return merge_report_json(texts); });
}

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

#ifndef ARBB_MODEL_HPP
#define ARBB_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arbb/binarize.hpp"
#include "arbb/graph.hpp"
#include "arbb/ops.hpp"

namespace arbb {

enum class Architecture { SmallCNN, SmallResNet, ResNet18 };

std::string_view architecture_name(Architecture a);
Architecture parse_architecture(std::string_view name);

// Rational width multiplier; scaled channel counts round up and never
// drop below one.
struct Width {
  int num = 1;
  int den = 1;

  std::size_t apply(std::size_t channels) const;
  double value() const { return static_cast<double>(num) / den; }
  std::string str() const;
  // "1", "1/4", "3/8"
  static Width parse(std::string_view text);
};

struct ModelConfig {
  Architecture architecture = Architecture::SmallResNet;
  SchemeId scheme = SchemeId::FP32;
  Width width;
  std::size_t num_classes = 10;
  std::size_t in_channels = 3;
  std::size_t resolution = 32;
  // Stem width of smallcnn / smallresnet before width scaling. resnet18
  // always starts at 64.
  std::size_t base_width = 16;
  // Per-channel input statistics folded into the first layer. Empty means
  // the CIFAR-10 statistics for 3 channels, 0.5/0.25 otherwise.
  std::vector<float> norm_mean;
  std::vector<float> norm_std;
  double recu_tau_quantile = 0.99;
  std::optional<double> recu_fixed_tau;
  std::vector<std::string> class_names;

  void validate() const;
};

enum class InputCheck { Exact, AnySpatial };

template <class T>
struct ForwardFeatures {
  typename Graph<T>::Var features;  // final feature map [N,C,h,w], before pooling
  typename Graph<T>::Var logits;
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg, std::uint64_t init_seed = 0);

  const ModelConfig& config() const noexcept { return cfg_; }
  Shape input_shape() const { return {cfg_.in_channels, cfg_.resolution, cfg_.resolution}; }
  std::size_t num_classes() const noexcept { return cfg_.num_classes; }

  // Logits [N, num_classes]. Training graphs use batch statistics and, when
  // enabled on the graph, update the running statistics.
  template <class T>
  typename Graph<T>::Var forward(Graph<T>& g, typename Graph<T>::Var x, InputCheck check = InputCheck::Exact) const {
    return forward_features(g, x, check).logits;
  }

  template <class T>
  ForwardFeatures<T> forward_features(Graph<T>& g, typename Graph<T>::Var x,
                                      InputCheck check = InputCheck::Exact) const;

  // Eval-mode, gradient-free logits. With packed inference enabled every
  // binarized convolution runs on the xnor/popcount kernel; the result is
  // bit-identical to the float path.
  Tensor logits(const Tensor& x, InputCheck check = InputCheck::Exact) const;
  std::vector<int> predict(const Tensor& x) const;

  void set_packed_inference(bool on) noexcept { packed_ = on; }
  bool packed_inference() const noexcept { return packed_; }

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  Parameter& parameter(std::string_view name);
  const Parameter& parameter(std::string_view name) const;

  struct NamedBuffers {
    std::string name;
    ops::BatchNormBuffers* buffers;
  };
  // Batch-norm running statistics, in a fixed order.
  std::vector<NamedBuffers> buffers();
  std::vector<std::pair<std::string, const ops::BatchNormBuffers*>> buffers() const;

  // Number of trainable scalars.
  std::size_t parameter_count() const;
  // Convolutions whose inputs and weights are binarized.
  std::size_t binary_conv_count() const;

  const Parameter& head_weight() const { return params_[head_w_]; }
  const Parameter& head_bias() const { return params_[head_b_]; }

  // Distinct spatial sizes of every stage output for an input resolution;
  // throws ConfigError if a stride-2 stage meets an odd size.
  std::vector<std::size_t> stage_resolutions(std::size_t resolution) const;

 private:
  struct Norm {
    std::size_t gamma, beta, buffer;
  };
  struct Act {
    ActivationKind kind = ActivationKind::PReLU;
    long slope = -1, shift_in = -1, shift_out = -1;
  };
  struct Shortcut {
    bool present = false;
    bool downsample = false;
    long conv = -1;
    Norm norm{};
  };
  struct Unit {
    bool binary = false;
    std::size_t stride = 1, pad = 1;
    std::size_t weight = 0;
    long gamma = -1;  // XNOR++ learnable scale
    long beta = -1;   // RSign shift
    Norm norm{};
    Act act;
    Shortcut shortcut;
  };

  std::size_t add_param(std::string name, Tensor value, bool decay, bool trainable = true);
  Norm add_norm(const std::string& prefix, std::size_t channels);
  Act add_act(const std::string& prefix, std::size_t channels);
  void add_unit(const std::string& prefix, std::size_t in, std::size_t out, std::size_t stride, bool binary,
                bool residual, std::uint64_t seed);

  template <class T>
  typename Graph<T>::Var unit_forward(Graph<T>& g, const Unit& u, typename Graph<T>::Var x, bool packed) const;
  template <class T>
  typename Graph<T>::Var norm_forward(Graph<T>& g, const Norm& n, typename Graph<T>::Var x) const;
  template <class T>
  typename Graph<T>::Var act_forward(Graph<T>& g, const Act& a, typename Graph<T>::Var x) const;
  template <class T>
  ForwardFeatures<T> run(Graph<T>& g, typename Graph<T>::Var x, InputCheck check, bool packed) const;

  ModelConfig cfg_;
  std::vector<Parameter> params_;
  // Written only by training graphs with running-stat updates enabled.
  mutable std::vector<ops::BatchNormBuffers> buffers_;
  std::vector<std::string> buffer_names_;
  std::vector<Unit> units_;  // stem first
  std::vector<std::size_t> stride2_units_;
  std::size_t head_w_ = 0, head_b_ = 0;
  std::vector<float> mean_, std_;
  bool packed_ = true;
};

Model build_model(const ModelConfig& cfg, std::uint64_t init_seed = 0);

// Parameter tensors copied by name; shapes must match.
void copy_parameters(const Model& from, Model& to);

}  // namespace arbb

#endif  // ARBB_MODEL_HPP

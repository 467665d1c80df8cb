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

#ifndef ARBB_GRAPH_HPP
#define ARBB_GRAPH_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "arbb/tensor.hpp"

namespace arbb {

// A trainable (or frozen) model tensor. Storage is always 32-bit; a
// double-precision graph reads it through a cast.
struct Parameter {
  std::string name;
  Tensor value;
  bool trainable = true;
  bool decay = true;
};

enum class GraphMode { Train, Eval };

// Single-use reverse-mode tape. Records are appended in execution order, so
// ids are a topological order and backward is one reverse sweep.
template <class T>
class Graph {
 public:
  using TensorT = BasicTensor<T>;

  struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
  };

  using Backward = std::function<void(Graph&, const TensorT& grad_out)>;

  explicit Graph(GraphMode mode = GraphMode::Eval) : mode_(mode) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  GraphMode mode() const noexcept { return mode_; }
  bool training() const noexcept { return mode_ == GraphMode::Train; }

  // Sign nodes emit their smooth stand-in instead of +-1 (gradient checks).
  void set_smooth_surrogate(bool on) noexcept { smooth_ = on; }
  bool smooth_surrogate() const noexcept { return smooth_; }

  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

  // Parameters enter as constants (input gradients only, as in attacks).
  void set_parameter_grads(bool on) noexcept { param_grads_ = on; }

  void set_update_running_stats(bool on) noexcept { update_stats_ = on; }
  bool update_running_stats() const noexcept { return update_stats_ && training(); }

  Var constant(TensorT value) { return push("constant", std::move(value), {}, {}, false); }

  Var input(TensorT value) { return push("input", std::move(value), {}, {}, grad_enabled_); }

  Var parameter(const Parameter& p) {
    if (auto it = param_leaf_.find(&p); it != param_leaf_.end()) return Var{it->second};
    Var v = push("parameter", p.value.template cast<T>(), {}, {}, grad_enabled_ && param_grads_ && p.trainable);
    param_leaf_.emplace(&p, v.id);
    params_.emplace_back(&p, v.id);
    return v;
  }

  Var record(std::string_view op, TensorT value, std::vector<Var> inputs, Backward backward) {
    bool needs = false;
    if (grad_enabled_) {
      for (auto in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
    }
    if (!needs) return push(op, std::move(value), {}, {}, false);
    return push(op, std::move(value), std::move(inputs), std::move(backward), true);
  }

  const TensorT& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::string_view op_name(Var v) const { return node(v).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::size_t count_ops(std::string_view op) const {
    std::size_t n = 0;
    for (const auto& nd : nodes_) n += nd.op == op ? 1 : 0;
    return n;
  }

  const std::vector<Var> inputs(Var v) const { return node(v).inputs; }

  void accumulate(Var v, const TensorT& g) {
    auto& nd = node(v);
    if (!nd.requires_grad) return;
    if (g.shape() != nd.value.shape()) {
      throw ShapeError("gradient shape " + to_string(g.shape()) + " for value " + to_string(nd.value.shape()) +
                       " at op " + nd.op);
    }
    if (!nd.grad) {
      nd.grad = g;
      return;
    }
    auto& acc = *nd.grad;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }

  void backward(Var out, const TensorT& seed) {
    if (consumed_) throw LifecycleError("graph already consumed by a backward pass");
    consumed_ = true;
    if (!node(out).requires_grad) return;
    accumulate(out, seed);
    for (std::size_t id = out.id + 1; id-- > 0;) {
      auto& nd = nodes_[id];
      if (!nd.backward || !nd.grad) continue;
      nd.backward(*this, *nd.grad);
    }
  }

  void backward(Var scalar_out, T seed = T{1}) {
    backward(scalar_out, TensorT(value(scalar_out).shape(), seed));
  }

  bool consumed() const noexcept { return consumed_; }

  // Gradient of the last backward pass; zeros when nothing reached v.
  TensorT grad(Var v) const {
    const auto& nd = node(v);
    if (!consumed_) throw LifecycleError("gradient requested before backward");
    return nd.grad ? *nd.grad : TensorT(nd.value.shape());
  }

  // Gradients of trainable parameters reached by this graph, in first-use order.
  std::vector<std::pair<const Parameter*, TensorT>> parameter_grads() const {
    if (!consumed_) throw LifecycleError("parameter gradients requested before backward");
    std::vector<std::pair<const Parameter*, TensorT>> out;
    for (const auto& [p, id] : params_) {
      if (!nodes_[id].requires_grad) continue;
      const auto& nd = nodes_[id];
      out.emplace_back(p, nd.grad ? *nd.grad : TensorT(nd.value.shape()));
    }
    return out;
  }

 private:
  struct Node {
    std::string op;
    TensorT value;
    std::vector<Var> inputs;
    Backward backward;
    bool requires_grad = false;
    std::optional<TensorT> grad;
  };

  Var push(std::string_view op, TensorT value, std::vector<Var> inputs, Backward backward, bool requires_grad) {
    if (consumed_) throw LifecycleError("cannot record into a consumed graph");
    nodes_.push_back(Node{std::string(op), std::move(value), std::move(inputs), std::move(backward), requires_grad, {}});
    return Var{nodes_.size() - 1};
  }

  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw LifecycleError("variable does not belong to this graph");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw LifecycleError("variable does not belong to this graph");
    return nodes_[v.id];
  }

  GraphMode mode_;
  bool smooth_ = false;
  bool grad_enabled_ = true;
  bool update_stats_ = true;
  bool param_grads_ = true;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_leaf_;
  std::vector<std::pair<const Parameter*, std::size_t>> params_;
};

// Runs the backward pass from a scalar loss and returns dL/dx for the
// recorded input x. The graph is consumed.
template <class T>
BasicTensor<T> grad_input(Graph<T>& g, typename Graph<T>::Var loss, typename Graph<T>::Var x, T loss_grad = T{1}) {
  if (g.value(loss).size() != 1) throw ShapeError("grad_input expects a scalar loss");
  if (!g.requires_grad(x)) throw LifecycleError("input was not recorded as differentiable");
  g.backward(loss, loss_grad);
  return g.grad(x);
}

template <class T>
std::vector<std::pair<const Parameter*, BasicTensor<T>>> grad_params(Graph<T>& g, typename Graph<T>::Var loss,
                                                                      T loss_grad = T{1}) {
  if (g.value(loss).size() != 1) throw ShapeError("grad_params expects a scalar loss");
  g.backward(loss, loss_grad);
  return g.parameter_grads();
}

}  // namespace arbb

#endif  // ARBB_GRAPH_HPP

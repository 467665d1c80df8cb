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

#ifndef ARBB_OPS_HPP
#define ARBB_OPS_HPP

#include <optional>
#include <span>

#include "arbb/binarize.hpp"
#include "arbb/graph.hpp"

// The fixed operator set. Every op records its own backward on the graph;
// reductions accumulate in double regardless of T.
namespace arbb::ops {

template <class T>
using Var = typename Graph<T>::Var;

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

// Running statistics owned by a batch-norm layer. Written only by a
// training-mode graph with running-stat updates enabled.
struct BatchNormBuffers {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// x [N,in], w [out,in], b [out] -> [N,out]
template <class T>
Var<T> linear(Graph<T>& g, Var<T> x, Var<T> w, std::optional<Var<T>> b);

// x [N,C,H,W], w [O,C,kh,kw], b [O] -> [N,O,Ho,Wo]; zero padding.
template <class T>
Var<T> conv2d(Graph<T>& g, Var<T> x, Var<T> w, std::optional<Var<T>> b, Conv2dGeometry geo);

// Batch statistics in training graphs, running statistics otherwise.
// x is [N,C] or [N,C,H,W].
template <class T>
Var<T> batch_norm(Graph<T>& g, Var<T> x, Var<T> gamma, Var<T> beta, BatchNormBuffers& buffers);

template <class T>
Var<T> hardtanh(Graph<T>& g, Var<T> x);

// Channel-wise slope on axis 1.
template <class T>
Var<T> prelu(Graph<T>& g, Var<T> x, Var<T> slope);

// x + coeff * b with b broadcast over axis 1.
template <class T>
Var<T> channel_bias(Graph<T>& g, Var<T> x, Var<T> b, double coeff = 1.0);

// x * s with s of size [C] (axis 1) or [1].
template <class T>
Var<T> channel_scale(Graph<T>& g, Var<T> x, Var<T> s);

template <class T>
Var<T> avg_pool2d(Graph<T>& g, Var<T> x, std::size_t kernel, std::size_t stride);

// [N,C,H,W] -> [N,C]
template <class T>
Var<T> global_avg_pool(Graph<T>& g, Var<T> x);

template <class T>
Var<T> add(Graph<T>& g, Var<T> a, Var<T> b);

template <class T>
Var<T> scale(Graph<T>& g, Var<T> a, double c);

// sign with sign(0)=+1 in the forward, surrogate derivative in the backward.
// Smooth-surrogate graphs emit the stand-in function instead of sign.
template <class T>
Var<T> sign_binarize(Graph<T>& g, Var<T> x, Surrogate rule, double tau = 1.0);

// Weight scale of a binarized layer as a function of w (exact backward).
// Rules One/None/Learnable are not handled here. tau is used by
// ClampedChannelMeanAbs and treated as a constant.
template <class T>
Var<T> weight_scale_of(Graph<T>& g, Var<T> w, ScaleRule rule, double tau = 0.0);

// (x - mean_c) / std_c with constant per-channel statistics.
template <class T>
Var<T> normalize_input(Graph<T>& g, Var<T> x, std::span<const float> mean, std::span<const float> stddev);

// mean over the batch of -log softmax(logits)[y]
template <class T>
Var<T> softmax_cross_entropy(Graph<T>& g, Var<T> logits, std::span<const int> labels);

// mean over the batch of KL(softmax(p) || softmax(q))
template <class T>
Var<T> softmax_kl(Graph<T>& g, Var<T> p_logits, Var<T> q_logits);

}  // namespace arbb::ops

namespace arbb {

// Output spatial size of a convolution or pooling window; throws ConfigError
// on invalid geometry.
std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

// Plain (graph-free) loss value helpers in double precision.
double cross_entropy_value(const Tensor& logits, std::span<const int> labels);
Tensor softmax(const Tensor& logits);

}  // namespace arbb

#endif  // ARBB_OPS_HPP

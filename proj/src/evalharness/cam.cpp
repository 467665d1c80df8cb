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

#include <algorithm>

#include "arbb/evaluation.hpp"

namespace arbb {

Tensor cam_from_features(const Tensor& features, std::span<const float> weights, std::size_t out_h,
                         std::size_t out_w) {
  if (features.rank() != 3) throw ShapeError("CAM features must be [C,h,w]");
  const std::size_t C = features.dim(0), h = features.dim(1), w = features.dim(2);
  if (weights.size() != C) {
    throw ArchitectureError("head has " + std::to_string(weights.size()) + " inputs for " + std::to_string(C) +
                            " feature channels");
  }
  std::vector<double> m(h * w, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) m[i] += static_cast<double>(weights[c]) * features[c * h * w + i];
  }
  const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
  const double mn = *lo, range = *hi - *lo;
  Tensor out({out_h, out_w});
  if (!(range > 0.0)) return out;
  for (std::size_t y = 0; y < out_h; ++y) {
    const std::size_t sy = y * h / out_h;
    for (std::size_t x = 0; x < out_w; ++x) {
      const std::size_t sx = x * w / out_w;
      out[y * out_w + x] = static_cast<float>((m[sy * w + sx] - mn) / range);
    }
  }
  return out;
}

Tensor compute_cam(const Model& model, const Tensor& x, int class_id) {
  if (x.rank() != 4 || x.dim(0) != 1) throw ShapeError("compute_cam takes one image [1,C,H,W]");
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= model.num_classes()) {
    throw LabelError("CAM class " + std::to_string(class_id) + " out of range");
  }
  Graph<float> g(GraphMode::Eval);
  g.set_grad_enabled(false);
  const auto f = model.forward_features(g, g.constant(x));
  const Tensor& feat = g.value(f.features);
  if (feat.rank() != 4) throw ArchitectureError("model does not expose a spatial feature map");
  const Tensor fm = feat.reshaped({feat.dim(1), feat.dim(2), feat.dim(3)});
  const Tensor& hw = model.head_weight().value;
  if (hw.rank() != 2 || hw.dim(1) != fm.dim(0)) throw ArchitectureError("head is not a linear map over pooled features");
  const std::size_t C = hw.dim(1);
  const std::span<const float> w(hw.ptr() + static_cast<std::size_t>(class_id) * C, C);
  return cam_from_features(fm, w, x.dim(2), x.dim(3));
}

double roi_concentration(const Tensor& cam, double threshold) {
  if (cam.size() == 0) throw ShapeError("empty CAM");
  std::size_t above = 0;
  for (float v : cam.data()) above += v > threshold ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(cam.size());
}

}  // namespace arbb

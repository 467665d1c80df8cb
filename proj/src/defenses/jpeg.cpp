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

#include <array>
#include <cmath>
#include <numbers>

#include "arbb/defenses.hpp"

namespace arbb {

namespace {

constexpr std::array<int, 64> kLuma = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                       14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                       18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                       49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::array<int, 64> kChroma = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                                         24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                                         99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                         99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

struct DctBasis {
  double c[8][8];  // c[u][x]
  DctBasis() {
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int x = 0; x < 8; ++x) c[u][x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16.0);
    }
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

// Quantize-dequantize one plane in place (values in the 0..255 range,
// dimensions already multiples of 8).
void code_plane(std::vector<double>& p, std::size_t H, std::size_t W, const std::array<int, 64>& q) {
  const auto& B = basis().c;
  double blk[8][8], tmp[8][8], coef[8][8];
  for (std::size_t by = 0; by < H; by += 8) {
    for (std::size_t bx = 0; bx < W; bx += 8) {
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) blk[y][x] = p[(by + y) * W + bx + x] - 128.0;
      }
      for (int u = 0; u < 8; ++u) {
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int y = 0; y < 8; ++y) s += B[u][y] * blk[y][x];
          tmp[u][x] = s;
        }
      }
      for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
          double s = 0.0;
          for (int x = 0; x < 8; ++x) s += tmp[u][x] * B[v][x];
          const double qv = q[static_cast<std::size_t>(u * 8 + v)];
          coef[u][v] = std::round(s / qv) * qv;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int v = 0; v < 8; ++v) {
          double s = 0.0;
          for (int u = 0; u < 8; ++u) s += B[u][y] * coef[u][v];
          tmp[y][v] = s;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          double s = 0.0;
          for (int v = 0; v < 8; ++v) s += tmp[y][v] * B[v][x];
          p[(by + y) * W + bx + x] = s + 128.0;
        }
      }
    }
  }
}

double to_byte(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

}  // namespace

int jpeg_quant_value(int base, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("JPEG quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  return std::clamp((base * scale + 50) / 100, 1, 255);
}

Tensor jpeg_round_trip(const Tensor& x, int quality) {
  if (quality < 1 || quality > 100) throw ConfigError("JPEG quality must be in [1, 100], got " + std::to_string(quality));
  if (x.rank() != 4) throw ShapeError("jpeg_round_trip expects [N,C,H,W]");
  std::array<int, 64> ql{}, qc{};
  for (std::size_t i = 0; i < 64; ++i) {
    ql[i] = jpeg_quant_value(kLuma[i], quality);
    qc[i] = jpeg_quant_value(kChroma[i], quality);
  }
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t PH = (H + 7) / 8 * 8, PW = (W + 7) / 8 * 8;
  Tensor out(x.shape());
  std::vector<std::vector<double>> planes(C, std::vector<double>(PH * PW));
  for (std::size_t n = 0; n < N; ++n) {
    auto px = [&](std::size_t c, std::size_t y, std::size_t xx) {
      const std::size_t yy = std::min(y, H - 1), xc = std::min(xx, W - 1);  // edge replication
      return to_byte(255.0 * x[((n * C + c) * H + yy) * W + xc]);
    };
    for (std::size_t y = 0; y < PH; ++y) {
      for (std::size_t xx = 0; xx < PW; ++xx) {
        const std::size_t i = y * PW + xx;
        if (C == 3) {
          const double r = px(0, y, xx), g = px(1, y, xx), b = px(2, y, xx);
          planes[0][i] = 0.299 * r + 0.587 * g + 0.114 * b;
          planes[1][i] = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
          planes[2][i] = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
        } else {
          for (std::size_t c = 0; c < C; ++c) planes[c][i] = px(c, y, xx);
        }
      }
    }
    for (std::size_t c = 0; c < C; ++c) code_plane(planes[c], PH, PW, (C == 3 && c > 0) ? qc : ql);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t xx = 0; xx < W; ++xx) {
        const std::size_t i = y * PW + xx;
        if (C == 3) {
          const double Y = planes[0][i], cb = planes[1][i] - 128.0, cr = planes[2][i] - 128.0;
          const double rgb[3] = {Y + 1.402 * cr, Y - 0.344136 * cb - 0.714136 * cr, Y + 1.772 * cb};
          for (std::size_t c = 0; c < 3; ++c) {
            out[((n * C + c) * H + y) * W + xx] = static_cast<float>(to_byte(rgb[c]) / 255.0);
          }
        } else {
          for (std::size_t c = 0; c < C; ++c) {
            out[((n * C + c) * H + y) * W + xx] = static_cast<float>(to_byte(planes[c][i]) / 255.0);
          }
        }
      }
    }
  }
  return out;
}

}  // namespace arbb

/*
 * Copyright 2026 The medxgan Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "medxgan/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace medxgan {

namespace {

// Rows of a 3x5 glyph, three bits per row, most significant bit on the left.
std::array<std::uint8_t, 5> glyph(char ch) {
  switch (ch) {
    case '0': return {7, 5, 5, 5, 7};
    case '1': return {2, 6, 2, 2, 7};
    case '2': return {7, 1, 7, 4, 7};
    case '3': return {7, 1, 7, 1, 7};
    case '4': return {5, 5, 7, 1, 1};
    case '5': return {7, 4, 7, 1, 7};
    case '6': return {7, 4, 7, 5, 7};
    case '7': return {7, 1, 1, 1, 1};
    case '8': return {7, 5, 7, 5, 7};
    case '9': return {7, 5, 7, 1, 7};
    case '.': return {0, 0, 0, 0, 2};
    case '-': return {0, 0, 7, 0, 0};
    case ':': return {0, 2, 0, 2, 0};
    case 'N': return {5, 7, 7, 7, 5};
    case 'P': return {7, 5, 7, 4, 4};
    default: return {0, 0, 0, 0, 0};
  }
}

constexpr int kPad = 2;
const Rgb kBackground{255, 255, 255};
const Rgb kInk{0, 0, 0};

std::string format_prob(double p) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", p);
  return buf;
}

RgbImage colorize_scaled(const Image& values, double max_value) {
  RgbImage out(values.height(), values.width());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = max_value > 0.0 ? std::fabs(values[i]) / max_value : 0.0;
    out[i] = jet(t);
  }
  return out;
}

double max_abs(const Image& values) {
  double m = 0.0;
  for (float v : values.values()) m = std::max(m, static_cast<double>(std::fabs(v)));
  return m;
}

}  // namespace

Rgb jet(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto channel = [](double x) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(1.5 - std::fabs(x), 0.0, 1.0)));
  };
  return {channel(4.0 * t - 3.0), channel(4.0 * t - 2.0), channel(4.0 * t - 1.0)};
}

RgbImage gray_to_rgb(const Image& image) {
  RgbImage out(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(
        std::lround(255.0 * std::clamp(static_cast<double>(image[i]), 0.0, 1.0)));
    out[i] = {v, v, v};
  }
  return out;
}

RgbImage colorize_magnitude(const Image& values) {
  return colorize_scaled(values, max_abs(values));
}

void draw_text(RgbImage& canvas, int row, int col, const std::string& text, Rgb color,
               int scale) {
  for (std::size_t k = 0; k < text.size(); ++k) {
    const auto g = glyph(text[k]);
    const int x0 = col + static_cast<int>(k) * 4 * scale;
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 3; ++c) {
        if (!((g[r] >> (2 - c)) & 1)) continue;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) {
            const int y = row + r * scale + dy, x = x0 + c * scale + dx;
            if (y >= 0 && y < canvas.height() && x >= 0 && x < canvas.width()) {
              canvas(y, x) = color;
            }
          }
        }
      }
    }
  }
}

void blit(RgbImage& canvas, const RgbImage& tile, int row, int col) {
  for (int r = 0; r < tile.height(); ++r) {
    for (int c = 0; c < tile.width(); ++c) {
      const int y = row + r, x = col + c;
      if (y >= 0 && y < canvas.height() && x >= 0 && x < canvas.width()) {
        canvas(y, x) = tile(r, c);
      }
    }
  }
}

RgbImage render_map(const AttributionMap& map, const Image* base) {
  const int h = map.values.height(), w = map.values.width();
  RgbImage canvas(h, 2 * w + kPad, kBackground);
  if (base != nullptr) {
    blit(canvas, gray_to_rgb(*base), 0, 0);
  } else {
    const double m = max_abs(map.values);
    Image scaled = map.magnitude();
    if (m > 0.0) {
      for (auto& v : scaled.values()) v = static_cast<float>(v / m);
    }
    blit(canvas, gray_to_rgb(scaled), 0, 0);
  }
  blit(canvas, colorize_magnitude(map.values), 0, w + kPad);
  return canvas;
}

RgbImage render_film_strip(const InterpolationSweep& sweep) {
  if (sweep.frames.empty()) return {};
  const int h = sweep.frames.front().height(), w = sweep.frames.front().width();
  const int n = static_cast<int>(sweep.frames.size());
  constexpr int kBand = 14;  // two text lines
  RgbImage canvas(kBand + h + kPad + h, n * (w + kPad) - kPad, kBackground);
  const double shared_max = max_abs(sweep.accumulated.back());
  for (int k = 0; k < n; ++k) {
    const int col = k * (w + kPad);
    draw_text(canvas, 1, col, "N" + format_prob(sweep.outputs[k].softmax[0]), kInk);
    draw_text(canvas, 8, col, "P" + format_prob(sweep.outputs[k].softmax[1]), kInk);
    blit(canvas, gray_to_rgb(sweep.frames[k]), kBand, col);
    blit(canvas, colorize_scaled(sweep.accumulated[k], shared_max), kBand + h + kPad, col);
  }
  return canvas;
}

}  // namespace medxgan

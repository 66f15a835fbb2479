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

#pragma once

#include <string>

#include "medxgan/attribution.hpp"
#include "medxgan/io.hpp"

namespace medxgan {

// Jet colormap for t in [0, 1]; values outside are clamped.
Rgb jet(double t);

RgbImage gray_to_rgb(const Image& image);
// |values| scaled by their maximum and colorized; an all-zero map is dark blue.
RgbImage colorize_magnitude(const Image& values);

// Draws text with a 3x5 pixel font (digits, '.', '-', ':', ' ', 'N', 'P')
// scaled by `scale`, clipped to the canvas. Other characters render blank.
void draw_text(RgbImage& canvas, int row, int col, const std::string& text, Rgb color,
               int scale = 1);

void blit(RgbImage& canvas, const RgbImage& tile, int row, int col);

// Two panels side by side: base image (grayscale) and colorized |values|.
RgbImage render_map(const AttributionMap& map, const Image* base);

// Top row: frames with their softmax pair printed above. Bottom row:
// accumulated |difference| maps colorized on a shared scale.
RgbImage render_film_strip(const InterpolationSweep& sweep);

}  // namespace medxgan

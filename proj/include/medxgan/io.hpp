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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "medxgan/grid.hpp"

namespace medxgan {

namespace fs = std::filesystem;
using nlohmann::json;

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};
using RgbImage = Grid<Rgb>;

// 8-bit PNG. Float images are quantized with round(v * 255) after clamping
// to [0, 1]; reads map back with v / 255.
void write_png(const fs::path& path, const Image& image);
void write_png(const fs::path& path, const Mask& mask);
void write_png(const fs::path& path, const RgbImage& image);
Image read_png_image(const fs::path& path);
Mask read_png_mask(const fs::path& path);

// Raw little-endian float32 grid, row-major.
void write_f32_grid(const fs::path& path, const Image& grid);
Image read_f32_grid(const fs::path& path, int height, int width);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const fs::path& path);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, std::string_view text);
// Write to a sibling temp file and rename into place.
void write_text_atomic(const fs::path& path, std::string_view text);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& value);

// Canonical JSON text used for hashing: sorted keys, no whitespace.
std::string canonical_dump(const json& value);

}  // namespace medxgan

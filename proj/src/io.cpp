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

#include "medxgan/io.hpp"

#include <png.h>

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>

#include "medxgan/error.hpp"

namespace medxgan {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary grid format assumes a little-endian host");

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void write_png_raw(const fs::path& path, int height, int width, int format,
                   const void* buffer) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = static_cast<png_uint_32>(format);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer, 0, nullptr)) {
    throw Error(ErrorCode::kIo, "failed to write PNG: " + std::string(img.message),
                {{"path", path.string()}});
  }
}

std::vector<std::uint8_t> read_png_gray(const fs::path& path, int& height,
                                        int& width) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error(ErrorCode::kIo, "failed to open PNG: " + std::string(img.message),
                {{"path", path.string()}});
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(ErrorCode::kIo, "failed to decode PNG: " + std::string(img.message),
                {{"path", path.string()}});
  }
  height = static_cast<int>(img.height);
  width = static_cast<int>(img.width);
  return buffer;
}

}  // namespace

void write_png(const fs::path& path, const Image& image) {
  std::vector<std::uint8_t> buffer(image.size());
  std::transform(image.values().begin(), image.values().end(), buffer.begin(),
                 quantize);
  write_png_raw(path, image.height(), image.width(), PNG_FORMAT_GRAY,
                buffer.data());
}

void write_png(const fs::path& path, const Mask& mask) {
  std::vector<std::uint8_t> buffer(mask.size());
  std::transform(mask.values().begin(), mask.values().end(), buffer.begin(),
                 [](std::uint8_t m) -> std::uint8_t { return m ? 255 : 0; });
  write_png_raw(path, mask.height(), mask.width(), PNG_FORMAT_GRAY, buffer.data());
}

void write_png(const fs::path& path, const RgbImage& image) {
  static_assert(sizeof(Rgb) == 3);
  write_png_raw(path, image.height(), image.width(), PNG_FORMAT_RGB, image.data());
}

Image read_png_image(const fs::path& path) {
  int h = 0, w = 0;
  const auto buffer = read_png_gray(path, h, w);
  Image image(h, w);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    image[i] = static_cast<float>(buffer[i]) / 255.0f;
  }
  return image;
}

Mask read_png_mask(const fs::path& path) {
  int h = 0, w = 0;
  const auto buffer = read_png_gray(path, h, w);
  Mask mask(h, w);
  for (std::size_t i = 0; i < buffer.size(); ++i) mask[i] = buffer[i] >= 128 ? 1 : 0;
  return mask;
}

void write_f32_grid(const fs::path& path, const Image& grid) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(grid.data());
  write_bytes(path, {bytes, grid.size() * sizeof(float)});
}

Image read_f32_grid(const fs::path& path, int height, int width) {
  const auto bytes = read_bytes(path);
  const std::size_t expected = static_cast<std::size_t>(height) * width * sizeof(float);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kShape, "float grid has unexpected size",
                {{"path", path.string()},
                 {"bytes", std::to_string(bytes.size())},
                 {"expected", std::to_string(expected)}});
  }
  Image grid(height, width);
  std::memcpy(grid.data(), bytes.data(), expected);
  return grid;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(),
                  nullptr)) {
    throw Error(ErrorCode::kIo, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                              text.size()));
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open file for reading",
                {{"path", path.string()}});
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot write file", {{"path", path.string()}});
  }
}

void write_text(const fs::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                              text.size()));
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorCode::kIo, "atomic rename failed: " + ec.message(),
                {{"path", path.string()}});
  }
}

json read_json(const fs::path& path) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingArtifact, "file not found",
                {{"path", path.string()}});
  }
  const auto bytes = read_bytes(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed JSON: ") + e.what(),
                {{"path", path.string()}});
  }
}

void write_json(const fs::path& path, const json& value) {
  write_text(path, value.dump(2) + "\n");
}

std::string canonical_dump(const json& value) { return value.dump(); }

}  // namespace medxgan

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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "medxgan/grid.hpp"

namespace medxgan {

// [1, 1, H, W] float tensor holding a copy of the image.
torch::Tensor to_tensor(const Image& image);
// [N, 1, H, W] batch.
torch::Tensor to_batch(std::span<const Image> images);
// Accepts [H, W], [1, H, W] or [1, 1, H, W].
Image to_image(const torch::Tensor& tensor);

bool all_finite(const torch::Tensor& t);

// Deterministic parameter blob: every named parameter then every named
// buffer, raw little-endian, in registration order. The layout descriptor
// (names, dtypes, shapes, byte offsets) goes in the caller's sidecar JSON.
struct ParameterBlob {
  std::vector<std::uint8_t> bytes;
  nlohmann::json layout;
  std::string sha256() const;
};

ParameterBlob serialize_parameters(const torch::nn::Module& module);
// Copies values into an already-constructed module; throws Error(kShape) on a
// layout mismatch.
void deserialize_parameters(torch::nn::Module& module,
                            std::span<const std::uint8_t> bytes,
                            const nlohmann::json& layout);

void set_requires_grad(torch::nn::Module& module, bool requires_grad);

// Configures libtorch for bit-reproducible CPU execution.
void enable_deterministic_mode();

}  // namespace medxgan

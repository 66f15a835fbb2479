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

#include "medxgan/tensor_utils.hpp"

#include <cstring>

#include "medxgan/error.hpp"
#include "medxgan/io.hpp"

namespace medxgan {

torch::Tensor to_tensor(const Image& image) {
  return torch::from_blob(const_cast<float*>(image.data()),
                          {1, 1, image.height(), image.width()}, torch::kFloat32)
      .clone();
}

torch::Tensor to_batch(std::span<const Image> images) {
  if (images.empty()) return torch::empty({0, 1, 0, 0});
  const int h = images.front().height(), w = images.front().width();
  auto batch = torch::empty({static_cast<long>(images.size()), 1, h, w});
  float* dst = batch.data_ptr<float>();
  for (const auto& img : images) {
    if (img.height() != h || img.width() != w) {
      throw Error(ErrorCode::kShape, "images in a batch must share a shape");
    }
    std::memcpy(dst, img.data(), img.size() * sizeof(float));
    dst += img.size();
  }
  return batch;
}

Image to_image(const torch::Tensor& tensor) {
  auto t = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  while (t.dim() > 2) {
    if (t.size(0) != 1) {
      throw Error(ErrorCode::kShape, "expected a single-image tensor");
    }
    t = t.squeeze(0);
  }
  if (t.dim() != 2) throw Error(ErrorCode::kShape, "expected a 2-D image tensor");
  Image image(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)));
  std::memcpy(image.data(), t.data_ptr<float>(), image.size() * sizeof(float));
  return image;
}

bool all_finite(const torch::Tensor& t) { return torch::isfinite(t).all().item<bool>(); }

std::string ParameterBlob::sha256() const { return sha256_hex(bytes); }

ParameterBlob serialize_parameters(const torch::nn::Module& module) {
  ParameterBlob blob;
  blob.layout = nlohmann::json::array();
  auto append = [&](const std::string& kind, const std::string& name,
                    const torch::Tensor& value) {
    const auto t = value.detach().cpu().contiguous();
    const auto n = static_cast<std::size_t>(t.numel() * t.element_size());
    blob.layout.push_back({{"kind", kind},
                           {"name", name},
                           {"dtype", std::string(c10::toString(t.scalar_type()))},
                           {"shape", t.sizes().vec()},
                           {"offset", blob.bytes.size()},
                           {"bytes", n}});
    const auto* p = static_cast<const std::uint8_t*>(t.data_ptr());
    blob.bytes.insert(blob.bytes.end(), p, p + n);
  };
  for (const auto& item : module.named_parameters()) append("parameter", item.key(), item.value());
  for (const auto& item : module.named_buffers()) append("buffer", item.key(), item.value());
  return blob;
}

void deserialize_parameters(torch::nn::Module& module,
                            std::span<const std::uint8_t> bytes,
                            const nlohmann::json& layout) {
  torch::NoGradGuard no_grad;
  auto params = module.named_parameters();
  auto buffers = module.named_buffers();
  if (layout.size() != params.size() + buffers.size()) {
    throw Error(ErrorCode::kShape, "checkpoint layout does not match the model");
  }
  for (const auto& entry : layout) {
    const auto name = entry.at("name").get<std::string>();
    const bool is_param = entry.at("kind").get<std::string>() == "parameter";
    torch::Tensor* target = is_param ? params.find(name) : buffers.find(name);
    if (target == nullptr) {
      throw Error(ErrorCode::kShape, "checkpoint entry not found in model: " + name);
    }
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    if (target->sizes().vec() != shape) {
      throw Error(ErrorCode::kShape, "checkpoint shape mismatch for " + name);
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto n = entry.at("bytes").get<std::size_t>();
    if (offset + n > bytes.size() ||
        n != static_cast<std::size_t>(target->numel() * target->element_size())) {
      throw Error(ErrorCode::kShape, "checkpoint blob truncated at " + name);
    }
    auto src = torch::from_blob(const_cast<std::uint8_t*>(bytes.data() + offset),
                                target->sizes(), target->options().device(torch::kCPU));
    target->copy_(src);
  }
}

void set_requires_grad(torch::nn::Module& module, bool requires_grad) {
  for (auto& p : module.parameters()) p.set_requires_grad(requires_grad);
}

void enable_deterministic_mode() {
  torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(true, false);
}

}  // namespace medxgan

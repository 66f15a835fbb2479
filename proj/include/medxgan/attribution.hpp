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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "medxgan/classifier.hpp"
#include "medxgan/gan.hpp"
#include "medxgan/grid.hpp"

namespace medxgan {

enum class AttributionMethod { kDiff, kGradCam, kIg, kLig };

std::string to_string(AttributionMethod m);
// Accepts "diff", "gradcam", "ig" and "lig"; throws Error(kConfig) otherwise.
AttributionMethod parse_method(const std::string& name);

struct AttributionMap {
  Image values;
  AttributionMethod method = AttributionMethod::kDiff;
  bool is_signed = true;
  nlohmann::json sources = nlohmann::json::object();  // image id, checkpoint hashes

  Image magnitude() const;
  // Throws Error(kNumeric) on non-finite values and Error(kPrecondition) on a
  // negative value in an unsigned map.
  void validate() const;
};

// alphas() = {0, rate, 2 rate, ..., steps * rate}. The last entry is exactly
// 1 when steps * rate == 1 (the default rate is 1 / steps).
struct InterpolationSchedule {
  int steps = 10;
  std::optional<double> rate;

  std::vector<double> alphas() const;
};

AttributionMap difference_map(const Image& pos, const Image& neg);

struct InterpolationSweep {
  std::vector<double> alphas;
  std::vector<Image> frames;
  std::vector<ClassifierOutput> outputs;
  // accumulated[k] = sum over j <= k of |frames[j] - frames[j - 1]|;
  // accumulated[0] is all zeros.
  std::vector<Image> accumulated;
  // Share of consecutive steps whose positive softmax does not decrease.
  double monotonicity_fraction = 0.0;
};

// Frames G(z1, alpha z2) along the schedule. alpha = 0 uses an exactly-zero
// z2 and alpha = 1 uses the code unchanged.
InterpolationSweep interpolation_sweep(const GeneratorModel& g, const ClassifierModel& c,
                                       const LatentCode& code,
                                       const InterpolationSchedule& schedule);

// ReLU(sum_k mean(grads_k) * features_k), bilinearly resized to height x width
// with align_corners off. features and grads are [K, h, w].
AttributionMap gradcam_from_capture(const torch::Tensor& features, const torch::Tensor& grads,
                                    int height, int width);

// Grad-CAM on the pre-softmax score of target_class, scaled by score_scale.
AttributionMap gradcam(const ClassifierModel& c, const Image& image, int target_class,
                       const std::string& capture_layer, double score_scale = 1.0);

inline constexpr int kDefaultIntegrationSteps = 64;

// Midpoint-rule path integral of d softmax[target_class] / dx from baseline
// to image, times (image - baseline). The default baseline is all zeros.
AttributionMap integrated_gradients(const ClassifierModel& c, const Image& image,
                                    const std::optional<Image>& baseline = std::nullopt,
                                    int steps = kDefaultIntegrationSteps,
                                    int target_class = kPositiveClass);

// (G(z1, z2) - G(z1, 0)) times the midpoint-rule mean over alpha of the
// positive-softmax gradient with respect to the image, evaluated at
// G(z1, alpha z2).
AttributionMap latent_integrated_gradients(const GeneratorModel& g, const ClassifierModel& c,
                                           const LatentCode& code,
                                           int steps = kDefaultIntegrationSteps);

// <stem>.f32 raw grid, <stem>.json sidecar and <stem>.png render. The render
// shows the base image (or |values| when absent) beside the colorized
// magnitude. Returns the written paths.
std::vector<std::filesystem::path> save_map(const AttributionMap& map,
                                            const std::filesystem::path& dir,
                                            const std::string& stem,
                                            const Image* base = nullptr);
AttributionMap load_map(const std::filesystem::path& dir, const std::string& stem);

}  // namespace medxgan

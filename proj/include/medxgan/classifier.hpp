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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "medxgan/grid.hpp"
#include "medxgan/phantom.hpp"

namespace medxgan {

inline constexpr int kNegativeClass = 0;
inline constexpr int kPositiveClass = 1;

// Conv blocks (3x3 conv, ReLU, 2x2 max-pool) followed by a two-layer head
// that ends in exactly two logits ordered [negative, positive].
struct ClassifierArch {
  int image_size = 64;
  std::vector<int> widths{16, 32, 64, 64};
  int hidden = 64;

  void validate() const;
  // Layer ids accepted for feature capture: "block1" .. "blockN".
  std::vector<std::string> layer_ids() const;
  std::string default_capture_layer() const { return layer_ids().back(); }

  friend bool operator==(const ClassifierArch&, const ClassifierArch&) = default;
};

void to_json(nlohmann::json& j, const ClassifierArch& a);
void from_json(const nlohmann::json& j, ClassifierArch& a);

class ClassifierNetImpl : public torch::nn::Module {
 public:
  explicit ClassifierNetImpl(const ClassifierArch& arch);

  torch::Tensor forward(const torch::Tensor& x);
  // Same as forward, additionally returning the post-ReLU, pre-pool activation
  // of conv block `block` (0-based) through `features`.
  torch::Tensor forward_capture(const torch::Tensor& x, int block,
                                torch::Tensor& features);

  torch::nn::Linear& output_layer() { return fc2_; }

 private:
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(ClassifierNet);

struct ClassifierHyperParams {
  int epochs = 8;
  int batch_size = 64;
  double learning_rate = 1e-3;
  // Sanity mode: train on randomly permuted labels.
  bool shuffle_labels = false;
};

void to_json(nlohmann::json& j, const ClassifierHyperParams& h);
void from_json(const nlohmann::json& j, ClassifierHyperParams& h);

struct ClassifierMetrics {
  double val_accuracy = 0.0;
  double val_auc = 0.0;
  std::vector<double> epoch_loss;
};

class ClassifierModel {
 public:
  ClassifierModel(ClassifierArch arch, std::uint64_t init_seed);

  const ClassifierArch& arch() const { return arch_; }
  // Module handles share state; const only guards the model's own fields.
  ClassifierNet& net() const { return net_; }

  // Disables gradients on every parameter. Frozen models refuse training.
  void freeze();
  bool frozen() const { return frozen_; }

  // SHA-256 over the serialized parameter blob.
  std::string checksum() const;

  // Logits for a [N, 1, H, W] batch. Gradients flow to the input only.
  torch::Tensor logits(const torch::Tensor& batch) const;
  torch::Tensor softmax(const torch::Tensor& batch) const;

  int layer_index(const std::string& layer_id) const;

  nlohmann::json& metadata() { return metadata_; }
  const nlohmann::json& metadata() const { return metadata_; }

  // params.bin + classifier.json inside dir.
  void save(const std::filesystem::path& dir) const;
  static ClassifierModel load(const std::filesystem::path& dir);

 private:
  ClassifierArch arch_;
  mutable ClassifierNet net_;
  bool frozen_ = false;
  nlohmann::json metadata_ = nlohmann::json::object();
};

struct TrainedClassifier {
  ClassifierModel model;
  ClassifierMetrics metrics;
};

// Throws Error(kNumeric) on a non-finite loss and Error(kConfig) when the
// datasets disagree with each other or with the architecture.
TrainedClassifier train_classifier(const Dataset& train_set, const Dataset& val_set,
                                   const ClassifierArch& arch,
                                   const ClassifierHyperParams& hp, std::uint64_t seed);

struct ClassifierOutput {
  std::array<double, 2> logits{};
  std::array<double, 2> softmax{};
  // [K, h, w] feature maps and d(logit_positive)/d(features), when captured.
  std::optional<torch::Tensor> captured_features;
  std::optional<torch::Tensor> captured_feature_grads;
};

ClassifierOutput predict(const ClassifierModel& model, const Image& image,
                         const std::optional<std::string>& capture_layer = std::nullopt);

struct FeatureCapture {
  torch::Tensor features;  // [K, h, w]
  torch::Tensor grads;     // d(score)/d(features), same shape
  std::array<double, 2> logits{};
};

// Captures block activations and the gradient of the pre-softmax score of
// `target_class`, multiplied by `score_scale`.
FeatureCapture capture_features(const ClassifierModel& model, const Image& image,
                                const std::string& layer_id, int target_class,
                                double score_scale = 1.0);

// d softmax[target_class] / d pixels.
Image input_gradient(const ClassifierModel& model, const Image& image, int target_class);
// Batched form over [N, 1, H, W]; returns a tensor of the same shape.
torch::Tensor input_gradients(const ClassifierModel& model, const torch::Tensor& batch,
                              int target_class);

// Positive-class softmax for every image in the batch.
std::vector<double> positive_scores(const ClassifierModel& model,
                                    const torch::Tensor& batch);

struct EvalMetrics {
  double accuracy = 0.0;
  double auc = 0.0;
};

EvalMetrics evaluate(const ClassifierModel& model, const Dataset& dataset);

// Area under the ROC curve via the Mann-Whitney rank statistic with midranks
// for ties. Throws Error(kUndefined) when only one class is present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace medxgan

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
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "medxgan/classifier.hpp"
#include "medxgan/grid.hpp"
#include "medxgan/phantom.hpp"
#include "medxgan/rng.hpp"

namespace medxgan {

// Generator input split into a structure code z1 and a pathology code z2.
// Negative codes carry an exactly-zero z2.
struct LatentCode {
  std::vector<float> z1;
  std::vector<float> z2;
  int intended_label = 0;

  bool z2_is_zero() const;
  friend bool operator==(const LatentCode&, const LatentCode&) = default;
};

enum class LabelPolicy { kAllNegative, kAllPositive, kBalanced };

// z1 ~ N(0, I) always; z2 = 0 for label 0 and z2 ~ N(0, I) for label 1.
// Balanced batches put floor(batch/2) negatives first, then positives.
std::vector<LatentCode> sample_latent(int batch, LabelPolicy policy, int d1, int d2,
                                      Rng& rng);

// Packs codes into [B, d1] and [B, d2] tensors.
std::pair<torch::Tensor, torch::Tensor> to_tensors(std::span<const LatentCode> codes);

enum class GeneratorKind {
  // Anatomy image from z1 plus a rectified, bias-free pathology layer from z2
  // gated by an anatomy mask. G(z1, 0) is exactly the anatomy image.
  kAdditive,
  // Plain DCGAN stack over the concatenation [z1; z2].
  kConcat,
};

struct GeneratorArch {
  int image_size = 64;
  int d1 = 100;
  int d2 = 10;
  GeneratorKind kind = GeneratorKind::kAdditive;
  int width = 32;
  int pathology_width = 16;

  void validate() const;
  friend bool operator==(const GeneratorArch&, const GeneratorArch&) = default;
};

void to_json(nlohmann::json& j, const GeneratorArch& a);
void from_json(const nlohmann::json& j, GeneratorArch& a);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorArch& arch);
  // [B, d1], [B, d2] -> [B, 1, S, S] with values in [0, 1].
  torch::Tensor forward(const torch::Tensor& z1, const torch::Tensor& z2);

  const GeneratorArch& arch() const { return arch_; }

 private:
  GeneratorArch arch_;
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::ConvTranspose2d image_head_{nullptr};
  torch::nn::ConvTranspose2d gate_head_{nullptr};
  torch::nn::Sequential pathology_{nullptr};
};
TORCH_MODULE(Generator);

struct DiscriminatorArch {
  int image_size = 64;
  int width = 32;
  friend bool operator==(const DiscriminatorArch&, const DiscriminatorArch&) = default;
};

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorArch& arch);
  torch::Tensor logits(const torch::Tensor& x);
  // Real-probability in (0, 1), shape [B].
  torch::Tensor forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

 private:
  torch::nn::Sequential body_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Discriminator);

// Frozen-after-training model handles with checkpoint I/O.
struct GeneratorModel {
  GeneratorArch arch;
  mutable Generator net{nullptr};
  nlohmann::json metadata = nlohmann::json::object();

  GeneratorModel(GeneratorArch a, std::uint64_t init_seed);
  std::string checksum() const;
  void save(const std::filesystem::path& dir) const;
  static GeneratorModel load(const std::filesystem::path& dir);
};

struct DiscriminatorModel {
  DiscriminatorArch arch;
  mutable Discriminator net{nullptr};
  nlohmann::json metadata = nlohmann::json::object();

  DiscriminatorModel(DiscriminatorArch a, std::uint64_t init_seed);
  std::string checksum() const;
  void save(const std::filesystem::path& dir) const;
  static DiscriminatorModel load(const std::filesystem::path& dir);
};

inline constexpr double kProbabilityEpsilon = 1e-7;

struct GanTrainConfig {
  GeneratorArch generator;
  int discriminator_width = 32;
  int epochs = 15;
  int batch_size = 64;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  // Weight of the classifier term. Zero is only accepted in ablation mode.
  double w_c = 1.0;
  bool ablation = false;
  // Use the literal minimax generator term log(1 - D(G(z))).
  bool saturating = false;
  int checkpoint_every = 0;  // epochs; 0 disables intermediate checkpoints
  int collapse_window = 200;
  double collapse_threshold = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const GanTrainConfig& c);
void from_json(const nlohmann::json& j, GanTrainConfig& c);

struct GanLossTerms {
  torch::Tensor loss_d;
  torch::Tensor loss_g_adv;
  torch::Tensor loss_g_cls;
};

// Loss terms from network outputs: discriminator probabilities on real and
// generated samples [B], classifier softmax on generated samples [B, 2] and
// intended labels [B]. Probabilities are clamped to [eps, 1 - eps] before
// every log. Throws Error(kNumeric) if any term is non-finite.
GanLossTerms loss_terms_from_outputs(const torch::Tensor& d_real,
                                     const torch::Tensor& d_fake,
                                     const torch::Tensor& class_probs,
                                     const torch::Tensor& labels, bool saturating = false);

GanLossTerms gan_loss_terms(Generator& g, Discriminator& d, const ClassifierModel& c,
                            const torch::Tensor& real_batch,
                            std::span<const LatentCode> latent_batch,
                            bool saturating = false);

struct GanLogRow {
  int epoch = 0;
  int step = 0;
  double loss_d = 0.0;
  double loss_g_adv = 0.0;
  double loss_g_cls = 0.0;
};

std::string training_log_csv(std::span<const GanLogRow> rows);

struct GanTrainResult {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  std::vector<GanLogRow> log;
  int steps_per_epoch = 0;
  bool halted = false;
  std::string halt_report;
  std::string classifier_checksum_before;
  std::string classifier_checksum_after;
};

using CheckpointCallback =
    std::function<void(int epoch, const GeneratorModel&, const DiscriminatorModel&)>;

// Alternating D-step / G-step training with G minimizing
// loss_G_adv + w_c * loss_G_cls. Stops early (halted = true) when loss_D stays
// below collapse_threshold for collapse_window consecutive steps.
GanTrainResult train_medxgan(const GanTrainConfig& cfg, const Dataset& dataset,
                             const ClassifierModel& classifier,
                             const CheckpointCallback& on_checkpoint = {});

// Evaluates each code on its own (batch of one) in inference mode, so the
// result for a code never depends on what else is being generated.
std::vector<Image> generate(const GeneratorModel& g, std::span<const LatentCode> codes);
Image generate(const GeneratorModel& g, const LatentCode& code);

}  // namespace medxgan

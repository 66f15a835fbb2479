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

#include "medxgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {

namespace {

constexpr const char* kCheckpointVersion = "1";

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

int upsampling_levels(int image_size) {
  int levels = 0;
  for (int s = image_size; s > 4; s /= 2) {
    if (s % 2 != 0) return -1;
    ++levels;
  }
  return levels;
}

std::string kind_name(GeneratorKind kind) {
  return kind == GeneratorKind::kAdditive ? "additive" : "concat";
}

GeneratorKind parse_kind(const std::string& name) {
  if (name == "additive") return GeneratorKind::kAdditive;
  if (name == "concat") return GeneratorKind::kConcat;
  throw Error(ErrorCode::kConfig, "unknown generator kind: " + name);
}

torch::nn::ConvTranspose2dOptions up(int in, int out, bool first, bool bias = true) {
  return torch::nn::ConvTranspose2dOptions(in, out, 4)
      .stride(first ? 1 : 2)
      .padding(first ? 0 : 1)
      .bias(bias);
}

torch::Tensor clamped_log(const torch::Tensor& p) {
  return torch::log(p.clamp(kProbabilityEpsilon, 1.0 - kProbabilityEpsilon));
}

void check_codes(const GeneratorArch& arch, std::span<const LatentCode> codes) {
  for (const auto& c : codes) {
    if (static_cast<int>(c.z1.size()) != arch.d1 || static_cast<int>(c.z2.size()) != arch.d2) {
      throw Error(ErrorCode::kShape, "latent code dimensions do not match the generator",
                  {{"d1", std::to_string(c.z1.size())},
                   {"d2", std::to_string(c.z2.size())},
                   {"expected_d1", std::to_string(arch.d1)},
                   {"expected_d2", std::to_string(arch.d2)}});
    }
  }
}


// Normal(0, 0.02) convolution weights, Normal(1, 0.02) batch-norm scales and
// zero biases.
void dcgan_init(torch::nn::Module& root) {
  torch::NoGradGuard no_grad;
  for (const auto& m : root.modules(/*include_self=*/true)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      conv->weight.normal_(0.0, 0.02);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* deconv = m->as<torch::nn::ConvTranspose2d>()) {
      deconv->weight.normal_(0.0, 0.02);
      if (deconv->bias.defined()) deconv->bias.zero_();
    } else if (auto* bn = m->as<torch::nn::BatchNorm2d>()) {
      bn->weight.normal_(1.0, 0.02);
      bn->bias.zero_();
    }
  }
}

}  // namespace

bool LatentCode::z2_is_zero() const {
  return std::all_of(z2.begin(), z2.end(), [](float v) { return v == 0.0f; });
}

std::vector<LatentCode> sample_latent(int batch, LabelPolicy policy, int d1, int d2,
                                      Rng& rng) {
  if (batch < 0 || d1 < 1 || d2 < 1) {
    throw Error(ErrorCode::kPrecondition, "invalid latent sampling request");
  }
  std::vector<LatentCode> codes(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i) {
    LatentCode& c = codes[i];
    switch (policy) {
      case LabelPolicy::kAllNegative: c.intended_label = 0; break;
      case LabelPolicy::kAllPositive: c.intended_label = 1; break;
      case LabelPolicy::kBalanced: c.intended_label = i < batch / 2 ? 0 : 1; break;
    }
    c.z1.resize(d1);
    for (auto& v : c.z1) v = static_cast<float>(rng.normal());
    c.z2.assign(d2, 0.0f);
    if (c.intended_label == 1) {
      for (auto& v : c.z2) v = static_cast<float>(rng.normal());
    }
  }
  return codes;
}

std::pair<torch::Tensor, torch::Tensor> to_tensors(std::span<const LatentCode> codes) {
  if (codes.empty()) throw Error(ErrorCode::kPrecondition, "empty latent batch");
  const auto b = static_cast<long>(codes.size());
  const auto d1 = static_cast<long>(codes.front().z1.size());
  const auto d2 = static_cast<long>(codes.front().z2.size());
  auto z1 = torch::empty({b, d1});
  auto z2 = torch::empty({b, d2});
  for (long i = 0; i < b; ++i) {
    if (static_cast<long>(codes[i].z1.size()) != d1 || static_cast<long>(codes[i].z2.size()) != d2) {
      throw Error(ErrorCode::kShape, "latent codes in a batch must share dimensions");
    }
    std::copy(codes[i].z1.begin(), codes[i].z1.end(), z1[i].data_ptr<float>());
    std::copy(codes[i].z2.begin(), codes[i].z2.end(), z2[i].data_ptr<float>());
  }
  return {z1, z2};
}

void GeneratorArch::validate() const {
  if (upsampling_levels(image_size) < 1) {
    throw Error(ErrorCode::kConfig, "generator image_size must be 4 * 2^k with k >= 1");
  }
  if (d1 < 1 || d2 < 1) throw Error(ErrorCode::kConfig, "latent dimensions must be positive");
  if (width < 1 || pathology_width < 1) {
    throw Error(ErrorCode::kConfig, "generator widths must be positive");
  }
}

void to_json(nlohmann::json& j, const GeneratorArch& a) {
  j = {{"image_size", a.image_size},   {"d1", a.d1},
       {"d2", a.d2},                   {"kind", kind_name(a.kind)},
       {"width", a.width},             {"pathology_width", a.pathology_width}};
}

void from_json(const nlohmann::json& j, GeneratorArch& a) {
  read_field(j, "image_size", a.image_size);
  read_field(j, "d1", a.d1);
  read_field(j, "d2", a.d2);
  if (j.contains("kind")) a.kind = parse_kind(j.at("kind").get<std::string>());
  read_field(j, "width", a.width);
  read_field(j, "pathology_width", a.pathology_width);
}

GeneratorImpl::GeneratorImpl(const GeneratorArch& arch) : arch_(arch) {
  arch_.validate();
  const int levels = upsampling_levels(arch.image_size);
  const int trunk_in = arch.kind == GeneratorKind::kAdditive ? arch.d1 : arch.d1 + arch.d2;

  // The trunk stops at half resolution; the heads upsample once more.
  trunk_ = register_module("trunk", torch::nn::Sequential());
  int in = trunk_in;
  for (int i = 0; i < levels; ++i) {
    const int out = arch.width << (levels - 1 - i);
    trunk_->push_back(torch::nn::ConvTranspose2d(up(in, out, i == 0)));
    trunk_->push_back(torch::nn::BatchNorm2d(out));
    trunk_->push_back(torch::nn::ReLU());
    in = out;
  }
  image_head_ = register_module("image_head", torch::nn::ConvTranspose2d(up(in, 1, false)));
  dcgan_init(*trunk_);
  dcgan_init(*image_head_);

  if (arch.kind == GeneratorKind::kAdditive) {
    gate_head_ = register_module("gate_head", torch::nn::ConvTranspose2d(up(in, 1, false)));
    dcgan_init(*gate_head_);
    // Bias-free and normalization-free, so a zero z2 yields exactly zero.
    torch::nn::Sequential path;
    int pin = arch.d2;
    for (int i = 0; i < levels; ++i) {
      const int out = arch.pathology_width << (levels - 1 - i);
      path->push_back(torch::nn::ConvTranspose2d(up(pin, out, i == 0, false)));
      path->push_back(torch::nn::ReLU());
      pin = out;
    }
    path->push_back(torch::nn::ConvTranspose2d(up(pin, 1, false, false)));
    path->push_back(torch::nn::ReLU());
    pathology_ = register_module("pathology", path);
  }
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& z1, const torch::Tensor& z2) {
  const auto b = z1.size(0);
  if (arch_.kind == GeneratorKind::kConcat) {
    const auto z = torch::cat({z1, z2}, 1).view({b, -1, 1, 1});
    return torch::sigmoid(image_head_->forward(trunk_->forward(z)));
  }
  const auto h = trunk_->forward(z1.view({b, -1, 1, 1}));
  const auto anatomy = torch::sigmoid(image_head_->forward(h));
  const auto gate = torch::sigmoid(gate_head_->forward(h));
  const auto pathology = pathology_->forward(z2.view({b, -1, 1, 1}));
  return torch::clamp_max(anatomy + pathology * gate, 1.0);
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorArch& arch) {
  const int levels = upsampling_levels(arch.image_size);
  if (levels < 1) throw Error(ErrorCode::kConfig, "discriminator image_size must be 4 * 2^k");
  torch::nn::Sequential body;
  int in = 1;
  for (int i = 0; i < levels; ++i) {
    const int out = arch.width << i;
    body->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    body->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
    in = out;
  }
  body_ = register_module("body", body);
  // One extra input channel carries the minibatch standard deviation.
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(in + 1, 1, 4)));
  dcgan_init(*body_);
  dcgan_init(*head_);
}

torch::Tensor DiscriminatorImpl::logits(const torch::Tensor& x) {
  const auto h = body_->forward(x);
  auto spread = torch::zeros({h.size(0), 1, h.size(2), h.size(3)}, h.options());
  if (h.size(0) > 1) {
    const auto sd = torch::sqrt(h.var(0, /*unbiased=*/false) + 1e-8).mean();
    spread = spread + sd;
  }
  return head_->forward(torch::cat({h, spread}, 1)).view({x.size(0)});
}

GeneratorModel::GeneratorModel(GeneratorArch a, std::uint64_t init_seed) : arch(std::move(a)) {
  torch::manual_seed(init_seed);
  net = Generator(arch);
  net->eval();
}

std::string GeneratorModel::checksum() const { return serialize_parameters(*net).sha256(); }

void GeneratorModel::save(const fs::path& dir) const {
  const ParameterBlob blob = serialize_parameters(*net);
  write_bytes(dir / "params.bin", blob.bytes);
  write_json(dir / "generator.json", {{"version", kCheckpointVersion},
                                      {"architecture", arch},
                                      {"checksum", blob.sha256()},
                                      {"layout", blob.layout},
                                      {"metadata", metadata}});
}

GeneratorModel GeneratorModel::load(const fs::path& dir) {
  if (!fs::exists(dir / "generator.json") || !fs::exists(dir / "params.bin")) {
    throw Error(ErrorCode::kMissingArtifact, "generator checkpoint not found",
                {{"path", dir.string()}});
  }
  const auto j = read_json(dir / "generator.json");
  GeneratorModel model(j.at("architecture").get<GeneratorArch>(), 0);
  const auto bytes = read_bytes(dir / "params.bin");
  if (sha256_hex(bytes) != j.at("checksum").get<std::string>()) {
    throw Error(ErrorCode::kHashMismatch, "generator parameter blob checksum mismatch",
                {{"path", (dir / "params.bin").string()}});
  }
  deserialize_parameters(*model.net, bytes, j.at("layout"));
  model.metadata = j.value("metadata", nlohmann::json::object());
  model.net->eval();
  set_requires_grad(*model.net, false);
  return model;
}

DiscriminatorModel::DiscriminatorModel(DiscriminatorArch a, std::uint64_t init_seed)
    : arch(a) {
  torch::manual_seed(init_seed);
  net = Discriminator(arch);
  net->eval();
}

std::string DiscriminatorModel::checksum() const {
  return serialize_parameters(*net).sha256();
}

void DiscriminatorModel::save(const fs::path& dir) const {
  const ParameterBlob blob = serialize_parameters(*net);
  write_bytes(dir / "params.bin", blob.bytes);
  write_json(dir / "discriminator.json",
             {{"version", kCheckpointVersion},
              {"architecture", {{"image_size", arch.image_size}, {"width", arch.width}}},
              {"checksum", blob.sha256()},
              {"layout", blob.layout},
              {"metadata", metadata}});
}

DiscriminatorModel DiscriminatorModel::load(const fs::path& dir) {
  if (!fs::exists(dir / "discriminator.json") || !fs::exists(dir / "params.bin")) {
    throw Error(ErrorCode::kMissingArtifact, "discriminator checkpoint not found",
                {{"path", dir.string()}});
  }
  const auto j = read_json(dir / "discriminator.json");
  DiscriminatorArch arch{j.at("architecture").at("image_size").get<int>(),
                         j.at("architecture").at("width").get<int>()};
  DiscriminatorModel model(arch, 0);
  const auto bytes = read_bytes(dir / "params.bin");
  if (sha256_hex(bytes) != j.at("checksum").get<std::string>()) {
    throw Error(ErrorCode::kHashMismatch, "discriminator parameter blob checksum mismatch");
  }
  deserialize_parameters(*model.net, bytes, j.at("layout"));
  model.metadata = j.value("metadata", nlohmann::json::object());
  return model;
}

void GanTrainConfig::validate() const {
  generator.validate();
  if (epochs < 1 || batch_size < 2) {
    throw Error(ErrorCode::kConfig, "gan needs epochs >= 1 and batch_size >= 2");
  }
  if (lr_g <= 0 || lr_d <= 0) throw Error(ErrorCode::kConfig, "learning rates must be positive");
  if (w_c < 0) throw Error(ErrorCode::kConfig, "w_c must be non-negative");
  if (w_c == 0 && !ablation) {
    throw Error(ErrorCode::kConfig,
                "w_c = 0 degenerates to a plain GAN; set ablation = true to allow it");
  }
  if (collapse_window < 1) throw Error(ErrorCode::kConfig, "collapse_window must be positive");
}

void to_json(nlohmann::json& j, const GanTrainConfig& c) {
  j = {{"d1", c.generator.d1},
       {"d2", c.generator.d2},
       {"generator", kind_name(c.generator.kind)},
       {"g_width", c.generator.width},
       {"p_width", c.generator.pathology_width},
       {"d_width", c.discriminator_width},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"lr_g", c.lr_g},
       {"lr_d", c.lr_d},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"w_c", c.w_c},
       {"ablation", c.ablation},
       {"saturating", c.saturating},
       {"checkpoint_every", c.checkpoint_every},
       {"collapse_window", c.collapse_window},
       {"collapse_threshold", c.collapse_threshold}};
}

void from_json(const nlohmann::json& j, GanTrainConfig& c) {
  const nlohmann::json known = GanTrainConfig{};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorCode::kConfig, "unknown gan parameter: " + key);
  }
  read_field(j, "d1", c.generator.d1);
  read_field(j, "d2", c.generator.d2);
  if (j.contains("generator")) c.generator.kind = parse_kind(j.at("generator").get<std::string>());
  read_field(j, "g_width", c.generator.width);
  read_field(j, "p_width", c.generator.pathology_width);
  read_field(j, "d_width", c.discriminator_width);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "lr_g", c.lr_g);
  read_field(j, "lr_d", c.lr_d);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "w_c", c.w_c);
  read_field(j, "ablation", c.ablation);
  read_field(j, "saturating", c.saturating);
  read_field(j, "checkpoint_every", c.checkpoint_every);
  read_field(j, "collapse_window", c.collapse_window);
  read_field(j, "collapse_threshold", c.collapse_threshold);
}

GanLossTerms loss_terms_from_outputs(const torch::Tensor& d_real,
                                     const torch::Tensor& d_fake,
                                     const torch::Tensor& class_probs,
                                     const torch::Tensor& labels, bool saturating) {
  if (d_real.numel() == 0 || d_fake.numel() == 0) {
    throw Error(ErrorCode::kPrecondition, "loss terms need non-empty batches");
  }
  GanLossTerms t;
  t.loss_d = -clamped_log(d_real).mean() - clamped_log(1.0 - d_fake).mean();
  t.loss_g_adv = saturating ? clamped_log(1.0 - d_fake).mean() : -clamped_log(d_fake).mean();
  const auto p_intended = class_probs.gather(1, labels.view({-1, 1}).to(torch::kLong)).view(-1);
  t.loss_g_cls = -clamped_log(p_intended).mean();

  const double ld = t.loss_d.item<double>();
  const double la = t.loss_g_adv.item<double>();
  const double lc = t.loss_g_cls.item<double>();
  if (!std::isfinite(ld) || !std::isfinite(la) || !std::isfinite(lc)) {
    throw Error(ErrorCode::kNumeric, "non-finite GAN loss term",
                {{"loss_d", std::to_string(ld)},
                 {"loss_g_adv", std::to_string(la)},
                 {"loss_g_cls", std::to_string(lc)},
                 {"batch", std::to_string(d_fake.numel())},
                 {"mean_d_real", std::to_string(d_real.mean().item<double>())},
                 {"mean_d_fake", std::to_string(d_fake.mean().item<double>())}});
  }
  return t;
}

GanLossTerms gan_loss_terms(Generator& g, Discriminator& d, const ClassifierModel& c,
                            const torch::Tensor& real_batch,
                            std::span<const LatentCode> latent_batch, bool saturating) {
  if (!c.frozen()) throw Error(ErrorCode::kPrecondition, "classifier must be frozen");
  check_codes(g->arch(), latent_batch);
  const auto [z1, z2] = to_tensors(latent_batch);
  std::vector<long> labels;
  for (const auto& code : latent_batch) labels.push_back(code.intended_label);
  const auto fake = g->forward(z1, z2);
  return loss_terms_from_outputs(d->forward(real_batch), d->forward(fake), c.softmax(fake),
                                 torch::tensor(labels, torch::kLong), saturating);
}

std::string training_log_csv(std::span<const GanLogRow> rows) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,step,loss_D,loss_G_adv,loss_G_cls\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << r.loss_d << ',' << r.loss_g_adv << ','
        << r.loss_g_cls << '\n';
  }
  return out.str();
}

GanTrainResult train_medxgan(const GanTrainConfig& cfg, const Dataset& dataset,
                             const ClassifierModel& classifier,
                             const CheckpointCallback& on_checkpoint) {
  cfg.validate();
  if (!classifier.frozen()) {
    throw Error(ErrorCode::kPrecondition, "classifier must be frozen before GAN training");
  }
  if (dataset.manifest.count_negative != dataset.manifest.count_positive) {
    throw Error(ErrorCode::kPrecondition, "GAN training requires a class-balanced dataset");
  }
  const int size = cfg.generator.image_size;
  if (dataset.manifest.image_size != size || classifier.arch().image_size != size) {
    throw Error(ErrorCode::kConfig, "dataset, classifier and generator sizes disagree");
  }

  GanTrainResult result{
      GeneratorModel(cfg.generator, derive_seed(cfg.seed, "gan/generator")),
      DiscriminatorModel({size, cfg.discriminator_width},
                         derive_seed(cfg.seed, "gan/discriminator")),
  };
  result.classifier_checksum_before = classifier.checksum();
  Generator& g = result.generator.net;
  Discriminator& d = result.discriminator.net;

  std::vector<Image> images;
  for (const auto& s : dataset.samples) images.push_back(s.pixels);
  const torch::Tensor all_real = to_batch(images);
  const long n = all_real.size(0);
  const int batch = static_cast<int>(std::min<long>(cfg.batch_size, n));
  result.steps_per_epoch = static_cast<int>(std::max<long>(1, n / batch));

  torch::optim::Adam opt_g(g->parameters(), torch::optim::AdamOptions(cfg.lr_g).betas(
                                                 {cfg.beta1, cfg.beta2}));
  torch::optim::Adam opt_d(d->parameters(), torch::optim::AdamOptions(cfg.lr_d).betas(
                                                 {cfg.beta1, cfg.beta2}));
  Rng latent_rng(derive_seed(cfg.seed, "gan/latent"));
  Rng shuffle_rng(derive_seed(cfg.seed, "gan/shuffle"));
  std::vector<long> order(static_cast<std::size_t>(n));
  int collapsed_steps = 0;

  g->train();
  d->train();
  for (int epoch = 0; epoch < cfg.epochs && !result.halted; ++epoch) {
    std::iota(order.begin(), order.end(), 0L);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(0, static_cast<int>(i))]);
    }
    const auto perm = torch::tensor(order, torch::kLong);
    for (int step = 0; step < result.steps_per_epoch; ++step) {
      const auto real = all_real.index_select(
          0, perm.slice(0, static_cast<long>(step) * batch, static_cast<long>(step + 1) * batch));
      const auto codes =
          sample_latent(batch, LabelPolicy::kBalanced, cfg.generator.d1, cfg.generator.d2, latent_rng);
      const auto [z1, z2] = to_tensors(codes);
      std::vector<long> label_vec;
      for (const auto& c : codes) label_vec.push_back(c.intended_label);
      const auto labels = torch::tensor(label_vec, torch::kLong);

      const auto fake = g->forward(z1, z2);

      opt_d.zero_grad();
      const auto d_real = d->forward(real);
      const auto d_fake_detached = d->forward(fake.detach());
      const auto d_terms = loss_terms_from_outputs(
          d_real, d_fake_detached, torch::full({batch, 2}, 0.5), labels, cfg.saturating);
      d_terms.loss_d.backward();
      opt_d.step();

      opt_g.zero_grad();
      const auto g_terms = loss_terms_from_outputs(d_real.detach(), d->forward(fake),
                                                   classifier.softmax(fake), labels,
                                                   cfg.saturating);
      const auto g_loss = g_terms.loss_g_adv + cfg.w_c * g_terms.loss_g_cls;
      g_loss.backward();
      opt_g.step();

      GanLogRow row{epoch, step, d_terms.loss_d.item<double>(),
                    g_terms.loss_g_adv.item<double>(), g_terms.loss_g_cls.item<double>()};
      result.log.push_back(row);

      collapsed_steps = row.loss_d < cfg.collapse_threshold ? collapsed_steps + 1 : 0;
      if (collapsed_steps >= cfg.collapse_window) {
        result.halted = true;
        std::ostringstream report;
        report << "discriminator collapse: loss_D < " << cfg.collapse_threshold << " for "
               << collapsed_steps << " consecutive steps (epoch " << epoch << ", step " << step
               << ")";
        result.halt_report = report.str();
        break;
      }
    }
    if (on_checkpoint && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 &&
        !result.halted) {
      g->eval();
      d->eval();
      on_checkpoint(epoch + 1, result.generator, result.discriminator);
      g->train();
      d->train();
    }
  }
  g->eval();
  d->eval();
  set_requires_grad(*g, false);
  result.classifier_checksum_after = classifier.checksum();
  result.generator.metadata = {{"config", cfg},
                               {"epochs_completed", result.log.empty() ? 0 : result.log.back().epoch + 1},
                               {"dataset_hash", dataset.manifest.content_hash()},
                               {"classifier_checksum", result.classifier_checksum_before}};
  result.discriminator.metadata = result.generator.metadata;
  return result;
}

std::vector<Image> generate(const GeneratorModel& g, std::span<const LatentCode> codes) {
  check_codes(g.arch, codes);
  torch::NoGradGuard no_grad;
  g.net->eval();
  std::vector<Image> images;
  images.reserve(codes.size());
  for (const auto& code : codes) {
    const auto [z1, z2] = to_tensors(std::span(&code, 1));
    images.push_back(to_image(g.net->forward(z1, z2)));
  }
  return images;
}

Image generate(const GeneratorModel& g, const LatentCode& code) {
  return generate(g, std::span(&code, 1)).front();
}

}  // namespace medxgan

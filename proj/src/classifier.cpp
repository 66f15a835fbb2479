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

#include "medxgan/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/rng.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {

namespace {

constexpr int kEvalChunk = 256;
constexpr const char* kCheckpointVersion = "1";

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void reject_unknown(const nlohmann::json& j, const nlohmann::json& known,
                    const std::string& section) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorCode::kConfig, "unknown " + section + " parameter: " + key);
    }
  }
}

void check_image_shape(const ClassifierArch& arch, const Image& image) {
  if (image.height() != arch.image_size || image.width() != arch.image_size) {
    throw Error(ErrorCode::kShape, "image does not match classifier input size",
                {{"expected", std::to_string(arch.image_size)},
                 {"height", std::to_string(image.height())},
                 {"width", std::to_string(image.width())}});
  }
}

}  // namespace

void ClassifierArch::validate() const {
  if (widths.empty()) throw Error(ErrorCode::kConfig, "classifier needs at least one conv block");
  const int stride = 1 << widths.size();
  if (image_size % stride != 0 || image_size / stride < 1) {
    throw Error(ErrorCode::kConfig,
                "classifier image_size must be divisible by the cumulative pooling stride",
                {{"image_size", std::to_string(image_size)},
                 {"stride", std::to_string(stride)}});
  }
  if (hidden < 1) throw Error(ErrorCode::kConfig, "classifier hidden width must be positive");
}

std::vector<std::string> ClassifierArch::layer_ids() const {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < widths.size(); ++i) ids.push_back("block" + std::to_string(i + 1));
  return ids;
}

void to_json(nlohmann::json& j, const ClassifierArch& a) {
  j = {{"image_size", a.image_size}, {"widths", a.widths}, {"hidden", a.hidden}};
}

void from_json(const nlohmann::json& j, ClassifierArch& a) {
  reject_unknown(j, nlohmann::json(ClassifierArch{}), "classifier architecture");
  read_field(j, "image_size", a.image_size);
  read_field(j, "widths", a.widths);
  read_field(j, "hidden", a.hidden);
}

void to_json(nlohmann::json& j, const ClassifierHyperParams& h) {
  j = {{"epochs", h.epochs},
       {"batch_size", h.batch_size},
       {"learning_rate", h.learning_rate},
       {"shuffle_labels", h.shuffle_labels}};
}

void from_json(const nlohmann::json& j, ClassifierHyperParams& h) {
  reject_unknown(j, nlohmann::json(ClassifierHyperParams{}), "classifier");
  read_field(j, "epochs", h.epochs);
  read_field(j, "batch_size", h.batch_size);
  read_field(j, "learning_rate", h.learning_rate);
  read_field(j, "shuffle_labels", h.shuffle_labels);
}

ClassifierNetImpl::ClassifierNetImpl(const ClassifierArch& arch) {
  arch.validate();
  int in = 1;
  for (std::size_t i = 0; i < arch.widths.size(); ++i) {
    auto conv = torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, arch.widths[i], 3).padding(1));
    convs_.push_back(register_module("conv" + std::to_string(i + 1), conv));
    in = arch.widths[i];
  }
  const int spatial = arch.image_size >> arch.widths.size();
  fc1_ = register_module("fc1", torch::nn::Linear(in * spatial * spatial, arch.hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(arch.hidden, 2));
}

torch::Tensor ClassifierNetImpl::forward(const torch::Tensor& x) {
  torch::Tensor h = x;
  for (auto& conv : convs_) h = torch::max_pool2d(torch::relu(conv->forward(h)), 2);
  h = torch::relu(fc1_->forward(h.flatten(1)));
  return fc2_->forward(h);
}

torch::Tensor ClassifierNetImpl::forward_capture(const torch::Tensor& x, int block,
                                                 torch::Tensor& features) {
  torch::Tensor h = x;
  for (int i = 0; i < static_cast<int>(convs_.size()); ++i) {
    h = torch::relu(convs_[i]->forward(h));
    if (i == block) {
      // Leaf tensor so the score gradient exists even with frozen weights.
      features = h.detach().requires_grad_(true);
      h = features;
    }
    h = torch::max_pool2d(h, 2);
  }
  h = torch::relu(fc1_->forward(h.flatten(1)));
  return fc2_->forward(h);
}

ClassifierModel::ClassifierModel(ClassifierArch arch, std::uint64_t init_seed)
    : arch_(std::move(arch)), net_(nullptr) {
  arch_.validate();
  torch::manual_seed(init_seed);
  net_ = ClassifierNet(arch_);
  net_->eval();
}

void ClassifierModel::freeze() {
  set_requires_grad(*net_, false);
  net_->eval();
  frozen_ = true;
}

std::string ClassifierModel::checksum() const { return serialize_parameters(*net_).sha256(); }

torch::Tensor ClassifierModel::logits(const torch::Tensor& batch) const {
  return net_->forward(batch);
}

torch::Tensor ClassifierModel::softmax(const torch::Tensor& batch) const {
  return torch::softmax(logits(batch), 1);
}

int ClassifierModel::layer_index(const std::string& layer_id) const {
  const auto ids = arch_.layer_ids();
  const auto it = std::find(ids.begin(), ids.end(), layer_id);
  if (it == ids.end()) {
    throw Error(ErrorCode::kPrecondition, "unknown classifier layer id: " + layer_id);
  }
  return static_cast<int>(it - ids.begin());
}

void ClassifierModel::save(const fs::path& dir) const {
  const ParameterBlob blob = serialize_parameters(*net_);
  write_bytes(dir / "params.bin", blob.bytes);
  write_json(dir / "classifier.json", {{"version", kCheckpointVersion},
                                       {"architecture", arch_},
                                       {"checksum", blob.sha256()},
                                       {"layout", blob.layout},
                                       {"metadata", metadata_}});
}

ClassifierModel ClassifierModel::load(const fs::path& dir) {
  const fs::path sidecar = dir / "classifier.json";
  const fs::path params = dir / "params.bin";
  if (!fs::exists(sidecar) || !fs::exists(params)) {
    throw Error(ErrorCode::kMissingArtifact, "classifier checkpoint not found",
                {{"path", dir.string()}});
  }
  const auto j = read_json(sidecar);
  ClassifierModel model(j.at("architecture").get<ClassifierArch>(), 0);
  const auto bytes = read_bytes(params);
  if (sha256_hex(bytes) != j.at("checksum").get<std::string>()) {
    throw Error(ErrorCode::kHashMismatch, "classifier parameter blob checksum mismatch",
                {{"path", params.string()}});
  }
  deserialize_parameters(*model.net_, bytes, j.at("layout"));
  model.metadata_ = j.value("metadata", nlohmann::json::object());
  model.freeze();
  return model;
}

TrainedClassifier train_classifier(const Dataset& train_set, const Dataset& val_set,
                                   const ClassifierArch& arch,
                                   const ClassifierHyperParams& hp, std::uint64_t seed) {
  if (train_set.manifest.image_size != val_set.manifest.image_size) {
    throw Error(ErrorCode::kConfig, "train and validation datasets differ in image size");
  }
  if (train_set.manifest.image_size != arch.image_size) {
    throw Error(ErrorCode::kConfig, "dataset image size does not match the architecture",
                {{"dataset", std::to_string(train_set.manifest.image_size)},
                 {"architecture", std::to_string(arch.image_size)}});
  }
  if (hp.epochs < 1 || hp.batch_size < 1 || hp.learning_rate <= 0) {
    throw Error(ErrorCode::kConfig, "invalid classifier hyperparameters");
  }
  if (train_set.size() == 0) throw Error(ErrorCode::kConfig, "empty training set");

  ClassifierModel model(arch, derive_seed(seed, "classifier/init"));
  ClassifierNet& net = model.net();
  net->train();

  std::vector<Image> images;
  std::vector<long> labels;
  for (const auto& s : train_set.samples) {
    images.push_back(s.pixels);
    labels.push_back(s.label);
  }
  Rng rng(derive_seed(seed, "classifier/shuffle"));
  if (hp.shuffle_labels) {
    for (std::size_t i = labels.size() - 1; i > 0; --i) {
      std::swap(labels[i], labels[rng.uniform_int(0, static_cast<int>(i))]);
    }
  }
  const torch::Tensor all_x = to_batch(images);
  const torch::Tensor all_y = torch::tensor(labels, torch::kLong);

  torch::optim::Adam optimizer(net->parameters(),
                               torch::optim::AdamOptions(hp.learning_rate));
  ClassifierMetrics metrics;
  std::vector<long> order(images.size());
  const long n = static_cast<long>(images.size());
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0L);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(0, static_cast<int>(i))]);
    }
    const auto perm = torch::tensor(order, torch::kLong);
    double loss_sum = 0.0;
    long batches = 0;
    for (long start = 0; start < n; start += hp.batch_size) {
      const auto idx = perm.slice(0, start, std::min(n, start + hp.batch_size));
      const auto x = all_x.index_select(0, idx);
      const auto y = all_y.index_select(0, idx);
      optimizer.zero_grad();
      const auto loss = torch::cross_entropy_loss(net->forward(x), y);
      const double value = loss.item<double>();
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kNumeric,
                    "non-finite classifier loss (learning rate too high?)",
                    {{"epoch", std::to_string(epoch)},
                     {"batch_start", std::to_string(start)},
                     {"learning_rate", std::to_string(hp.learning_rate)}});
      }
      loss.backward();
      optimizer.step();
      loss_sum += value;
      ++batches;
    }
    metrics.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  net->eval();
  model.freeze();

  const EvalMetrics val = evaluate(model, val_set);
  metrics.val_accuracy = val.accuracy;
  metrics.val_auc = val.auc;
  model.metadata() = {{"epochs", hp.epochs},
                      {"seed", seed},
                      {"hyperparams", hp},
                      {"dataset_hash", train_set.manifest.content_hash()},
                      {"val_dataset_hash", val_set.manifest.content_hash()},
                      {"val_accuracy", metrics.val_accuracy},
                      {"val_auc", metrics.val_auc},
                      {"epoch_loss", metrics.epoch_loss}};
  return {std::move(model), std::move(metrics)};
}

ClassifierOutput predict(const ClassifierModel& model, const Image& image,
                         const std::optional<std::string>& capture_layer) {
  check_image_shape(model.arch(), image);
  ClassifierOutput out;
  if (capture_layer) {
    const FeatureCapture cap =
        capture_features(model, image, *capture_layer, kPositiveClass);
    out.logits = cap.logits;
    out.captured_features = cap.features;
    out.captured_feature_grads = cap.grads;
  } else {
    torch::NoGradGuard no_grad;
    const auto logits = model.logits(to_tensor(image))[0].to(torch::kDouble);
    out.logits = {logits[0].item<double>(), logits[1].item<double>()};
  }
  const auto sm = torch::softmax(torch::tensor({out.logits[0], out.logits[1]},
                                               torch::kDouble), 0);
  out.softmax = {sm[0].item<double>(), sm[1].item<double>()};
  return out;
}

FeatureCapture capture_features(const ClassifierModel& model, const Image& image,
                                const std::string& layer_id, int target_class,
                                double score_scale) {
  check_image_shape(model.arch(), image);
  const int block = model.layer_index(layer_id);
  if (target_class != kNegativeClass && target_class != kPositiveClass) {
    throw Error(ErrorCode::kPrecondition, "target class must be 0 or 1");
  }
  torch::Tensor features;
  const auto logits = model.net()->forward_capture(to_tensor(image), block, features);
  const auto score = logits[0][target_class] * score_scale;
  torch::Tensor grads;
  if (score.requires_grad()) {
    grads = torch::autograd::grad({score}, {features}, {}, false, false,
                                  /*allow_unused=*/true)[0];
  }
  if (!grads.defined()) grads = torch::zeros_like(features);
  FeatureCapture cap;
  cap.features = features.detach()[0];
  cap.grads = grads.detach()[0];
  const auto l = logits.detach()[0].to(torch::kDouble);
  cap.logits = {l[0].item<double>(), l[1].item<double>()};
  return cap;
}

torch::Tensor input_gradients(const ClassifierModel& model, const torch::Tensor& batch,
                              int target_class) {
  if (target_class != kNegativeClass && target_class != kPositiveClass) {
    throw Error(ErrorCode::kPrecondition, "target class must be 0 or 1");
  }
  auto x = batch.detach().clone().set_requires_grad(true);
  const auto probs = model.softmax(x).select(1, target_class);
  // Samples are independent, so the gradient of the sum is per-sample.
  auto grad = torch::autograd::grad({probs.sum()}, {x}, {}, false, false, true)[0];
  if (!grad.defined()) grad = torch::zeros_like(x);
  const auto bad = (~torch::isfinite(grad)).sum().item<long>();
  if (bad > 0) {
    throw Error(ErrorCode::kNumeric, "non-finite input gradient",
                {{"non_finite_pixels", std::to_string(bad)}});
  }
  return grad.detach();
}

Image input_gradient(const ClassifierModel& model, const Image& image, int target_class) {
  check_image_shape(model.arch(), image);
  return to_image(input_gradients(model, to_tensor(image), target_class));
}

std::vector<double> positive_scores(const ClassifierModel& model,
                                    const torch::Tensor& batch) {
  torch::NoGradGuard no_grad;
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(batch.size(0)));
  for (long start = 0; start < batch.size(0); start += kEvalChunk) {
    const auto chunk = batch.slice(0, start, std::min<long>(batch.size(0), start + kEvalChunk));
    const auto p = model.softmax(chunk).select(1, kPositiveClass).to(torch::kDouble).contiguous();
    const double* data = p.data_ptr<double>();
    scores.insert(scores.end(), data, data + p.numel());
  }
  return scores;
}

EvalMetrics evaluate(const ClassifierModel& model, const Dataset& dataset) {
  std::vector<Image> images;
  std::vector<int> labels;
  for (const auto& s : dataset.samples) {
    check_image_shape(model.arch(), s.pixels);
    images.push_back(s.pixels);
    labels.push_back(s.label);
  }
  const auto scores = positive_scores(model, to_batch(images));
  EvalMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int predicted = scores[i] > 0.5 ? kPositiveClass : kNegativeClass;
    correct += predicted == labels[i];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(scores.size());
  m.auc = roc_auc(scores, labels);
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kShape, "scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorCode::kUndefined, "AUC is undefined for a single-class dataset",
                {{"positives", std::to_string(n_pos)}, {"negatives", std::to_string(n_neg)}});
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks: tied scores share the average of the ranks they span.
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace medxgan

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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medxgan/classifier.hpp"
#include "medxgan/error.hpp"
#include "medxgan/phantom.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {
namespace {

TEST(Classifier, OutputsTwoLogitsAndSoftmax) {
  ClassifierModel m(testing::small_arch(), 1);
  const auto x = generate_sample(1, std::nullopt, testing::small_params()).pixels;
  const auto out = predict(m, x);
  EXPECT_NEAR(out.softmax[0] + out.softmax[1], 1.0, 1e-12);
  EXPECT_FALSE(out.captured_features.has_value());
  const auto cap = predict(m, x, "block2");
  ASSERT_TRUE(cap.captured_features.has_value());
  EXPECT_EQ(cap.captured_features->size(1), 16);  // 32 / 2 before the second pool
  EXPECT_NEAR(cap.logits[1], out.logits[1], 1e-5);
}

TEST(Classifier, RejectsWrongShapeAndLayer) {
  ClassifierModel m(testing::small_arch(), 1);
  EXPECT_THROW(predict(m, Image(20, 20)), Error);
  EXPECT_THROW(m.layer_index("block9"), Error);
}

TEST(Classifier, TrainedModelSeparatesPhantoms) {
  const auto& m = testing::trained_classifier();
  EXPECT_TRUE(m.frozen());
  int correct = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto neg = generate_sample(5000 + s, std::nullopt, testing::small_params());
    const auto pos = generate_sample(6000 + s, s, testing::small_params());
    correct += predict(m, neg.pixels).softmax[1] < 0.5;
    correct += predict(m, pos.pixels).softmax[1] > 0.5;
  }
  EXPECT_GE(correct, 36);
}

TEST(Classifier, SaveLoadPreservesChecksumAndOutputs) {
  const auto& m = testing::trained_classifier();
  const auto dir = testing::scratch_dir("clf_save");
  m.save(dir);
  const auto loaded = ClassifierModel::load(dir);
  EXPECT_EQ(loaded.checksum(), m.checksum());
  EXPECT_TRUE(loaded.frozen());
  const auto x = generate_sample(3, 4, testing::small_params()).pixels;
  EXPECT_EQ(predict(loaded, x).logits, predict(m, x).logits);
}

TEST(Classifier, GradientMatchesFiniteDifferences) {
  // Oracle: central differences on a double-precision copy of the network.
  const auto& m = testing::trained_classifier();
  const auto dir = testing::scratch_dir("clf_fd");
  m.save(dir);
  ClassifierModel copy = ClassifierModel::load(dir);
  copy.net()->to(torch::kDouble);

  const auto x = generate_sample(21, 8, testing::small_params()).pixels;
  const Image grad = input_gradient(m, x, kPositiveClass);
  const auto base = to_tensor(x).to(torch::kDouble);
  auto f = [&](const torch::Tensor& t) {
    torch::NoGradGuard no_grad;
    return torch::softmax(copy.net()->forward(t), 1)[0][1].item<double>();
  };

  std::vector<std::size_t> order(grad.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return std::fabs(grad[a]) > std::fabs(grad[b]); });
  const double gmax = std::fabs(grad[order.front()]);
  ASSERT_GT(gmax, 0.0);
  int checked = 0;
  for (std::size_t k = 0; k < order.size() && checked < 20; k += 7) {
    const std::size_t i = order[k];
    if (std::fabs(grad[i]) < 0.1 * gmax) break;
    const double h = 1e-4;
    auto plus = base.clone(), minus = base.clone();
    plus.view(-1)[i] += h;
    minus.view(-1)[i] -= h;
    const double fd = (f(plus) - f(minus)) / (2.0 * h);
    EXPECT_NEAR(grad[i], fd, 0.05 * std::fabs(fd)) << "pixel " << i;
    ++checked;
  }
  EXPECT_GE(checked, 5);
}

TEST(Classifier, BatchedGradientsMatchSingle) {
  const auto& m = testing::trained_classifier();
  std::vector<Image> xs;
  for (std::uint64_t s = 0; s < 3; ++s) xs.push_back(generate_sample(s, s, testing::small_params()).pixels);
  const auto batch = input_gradients(m, to_batch(xs), kPositiveClass);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Image single = input_gradient(m, xs[i], kPositiveClass);
    const Image from_batch = to_image(batch[static_cast<long>(i)]);
    for (std::size_t k = 0; k < single.size(); ++k) EXPECT_NEAR(single[k], from_batch[k], 1e-6);
  }
}

TEST(Classifier, RejectsInvalidHyperParameters) {
  const auto dir = testing::scratch_dir("clf_hp");
  build_dataset(testing::small_params(), 4, 1, dir / "d");
  const auto ds = load_dataset(dir / "d");
  ClassifierHyperParams hp;
  hp.epochs = 0;
  EXPECT_THROW(train_classifier(ds, ds, testing::small_arch(), hp, 1), Error);
}

TEST(RocAuc, KnownCases) {
  const std::vector<double> perfect{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> labels{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(roc_auc(perfect, labels), 1.0);
  const std::vector<double> reversed{0.9, 0.8, 0.2, 0.1};
  EXPECT_DOUBLE_EQ(roc_auc(reversed, labels), 0.0);
  const std::vector<double> ties{0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(roc_auc(ties, labels), 0.5);
  // One inverted pair out of four.
  const std::vector<double> mixed{0.1, 0.6, 0.5, 0.9};
  EXPECT_DOUBLE_EQ(roc_auc(mixed, labels), 0.75);
}

TEST(RocAuc, SingleClassIsUndefined) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> l{1, 1};
  try {
    roc_auc(s, l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }
}

}  // namespace
}  // namespace medxgan

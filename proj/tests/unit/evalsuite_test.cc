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

#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medxgan/error.hpp"
#include "medxgan/evalsuite.hpp"

namespace medxgan {
namespace {

Image ramp(int h, int w) {
  Image m(h, w);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = static_cast<float>(i);
  return m;
}

TEST(TopPercent, SelectsLargestMagnitudes) {
  Image m(2, 5, 0.0f);
  m[3] = -9.0f;
  m[7] = 4.0f;
  m[1] = 5.0f;
  const auto idx = top_percent_indices(m, 20.0);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[0], 3u);
  EXPECT_EQ(idx[1], 1u);
}

TEST(TopPercent, TiesBrokenByIndex) {
  Image m(1, 10, 1.0f);
  const auto idx = top_percent_indices(m, 30.0);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(TopPercent, FloorOfCount) {
  EXPECT_EQ(top_percent_indices(ramp(1, 10), 19.0).size(), 1u);
  EXPECT_EQ(top_percent_indices(ramp(1, 10), 100.0).size(), 10u);
  EXPECT_TRUE(top_percent_indices(Image(3, 3, 0.0f), 50.0).empty());
  EXPECT_THROW(top_percent_indices(ramp(1, 10), 0.0), Error);
}

TEST(Perturb, TopPercentExample) {
  const Image x = ramp(2, 5);  // mean 4.5
  const auto r = perturb(x, x, {SelectionRule::kTopPercent, 20.0});
  EXPECT_EQ(r.count, 2u);
  EXPECT_FLOAT_EQ(r.fill, 4.5f);
  EXPECT_EQ(r.image[9], 4.5f);
  EXPECT_EQ(r.image[8], 4.5f);
  EXPECT_EQ(r.image[7], 7.0f);
  EXPECT_FALSE(r.empty_selection);
}

TEST(Perturb, ThresholdExample) {
  const Image x = ramp(2, 5);
  const auto r = perturb(x, x, {SelectionRule::kThreshold, 6.5}, 0.0f);
  EXPECT_EQ(r.count, 3u);
  for (int i = 7; i < 10; ++i) EXPECT_EQ(r.image[i], 0.0f);
  EXPECT_EQ(r.image[6], 6.0f);
}

TEST(Perturb, IdempotentForFixedFill) {
  Rng rng(3);
  Image x(16, 16), map(16, 16);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform());
    map[i] = static_cast<float>(rng.normal());
  }
  const PerturbationSpec spec{SelectionRule::kTopPercent, 10.0};
  const auto once = perturb(x, map, spec);
  const auto twice = perturb(once.image, map, spec, once.fill);
  EXPECT_EQ(once.image, twice.image);
  EXPECT_EQ(once.selected, twice.selected);
}

TEST(Perturb, ShapeAndSpecErrors) {
  EXPECT_THROW(perturb(Image(4, 4), Image(4, 5), {}), Error);
  EXPECT_THROW(perturb(Image(4, 4), Image(4, 4), {SelectionRule::kTopPercent, 150.0}), Error);
  EXPECT_THROW(perturb(Image(4, 4), Image(4, 4), {SelectionRule::kThreshold, -1.0}), Error);
}

TEST(PerturbationSpec, JsonRoundTrip) {
  nlohmann::json j = PerturbationSpec{SelectionRule::kThreshold, 0.25};
  EXPECT_EQ(j.at("rule"), "threshold");
  const auto back = j.get<PerturbationSpec>();
  EXPECT_EQ(back.rule, SelectionRule::kThreshold);
  EXPECT_EQ(back.value, 0.25);
  EXPECT_THROW((nlohmann::json{{"rule", "random"}}.get<PerturbationSpec>()), Error);
}

TEST(Counterfactual, EmptySelectionDropsNothing) {
  const auto& c = testing::trained_classifier();
  const auto x = generate_sample(3, 4, testing::small_params()).pixels;
  const auto report = counterfactual_drop(c, {{"a", x}}, {{"zero", {Image(32, 32, 0.0f)}}},
                                          {SelectionRule::kTopPercent, 10.0});
  ASSERT_EQ(report.records.size(), 1u);
  EXPECT_EQ(report.records[0].metrics.at("drop"), 0.0);
  EXPECT_EQ(report.records[0].metrics.at("empty_selection"), 1.0);
}

TEST(Counterfactual, MaskedPathologyDrops) {
  // Oracle: the phantom's own pathology mask as the attribution.
  const auto& c = testing::trained_classifier();
  std::vector<NamedImage> images;
  std::vector<Image> maps;
  for (std::uint64_t s = 0; s < 6; ++s) {
    const auto sample = generate_sample(100 + s, 200 + s, testing::small_params());
    images.push_back({"img" + std::to_string(s), sample.pixels});
    const auto neg = generate_sample(100 + s, std::nullopt, testing::small_params());
    Image diff(32, 32);
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = sample.pixels[i] - neg.pixels[i];
    maps.push_back(diff);
  }
  const auto report =
      counterfactual_drop(c, images, {{"truth", maps}}, {SelectionRule::kTopPercent, 10.0});
  EXPECT_GT(report.aggregate("truth", "drop").mean, 0.2);
  EXPECT_EQ(report.aggregate("truth", "drop").n, 6u);
}

TEST(Counterfactual, RecordsShapeFailures) {
  const auto& c = testing::trained_classifier();
  const auto report = counterfactual_drop(c, {{"a", Image(32, 32, 0.5f)}},
                                          {{"bad", {Image(8, 8, 1.0f)}}}, {});
  ASSERT_EQ(report.records.size(), 1u);
  EXPECT_TRUE(report.records[0].failed);
  EXPECT_EQ(report.aggregates.count("bad/drop"), 0u);
}

TEST(Localization, IdenticalMapsGiveOne) {
  const Image m = ramp(8, 8);
  const auto r = localization_ratio(m, m);
  EXPECT_EQ(r.ratio, 1.0);
  EXPECT_EQ(r.lig, 63u);
}

TEST(Localization, SparseOverDense) {
  Image lig(4, 4, 0.0f), ig(4, 4, 1.0f);
  lig[0] = 2.0f;
  lig[5] = -1.0f;
  EXPECT_DOUBLE_EQ(localization_ratio(lig, ig).ratio, 2.0 / 16.0);
}

TEST(Localization, ZeroIgIsUndefined) {
  try {
    localization_ratio(ramp(4, 4), Image(4, 4, 0.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }
}

TEST(MaskOverlap, MaskAsMapIsPerfect) {
  Mask mask(10, 10, 0);
  Image map(10, 10, 0.0f);
  for (int r = 2; r < 6; ++r) {
    for (int col = 3; col < 7; ++col) {
      mask(r, col) = 1;
      map(r, col) = 1.0f;
    }
  }
  EXPECT_EQ(mask_overlap(map, mask, 10.0), 1.0);
  EXPECT_EQ(mask_overlap(map, mask, 16.0), 1.0);
}

TEST(MaskOverlap, UniformRandomMapMatchesMaskFraction) {
  // Monte-Carlo oracle: a random map hits the mask at its area fraction.
  Mask mask(32, 32, 0);
  for (int r = 0; r < 32; ++r) {
    for (int col = 0; col < 8; ++col) mask(r, col) = 1;  // 25%
  }
  Rng rng(9);
  double total = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    Image map(32, 32);
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = static_cast<float>(rng.uniform());
    total += mask_overlap(map, mask, 10.0);
  }
  EXPECT_NEAR(total / trials, 0.25, 0.02);
}

TEST(MaskOverlap, EmptySelectionIsUndefined) {
  EXPECT_THROW(mask_overlap(Image(4, 4, 0.0f), Mask(4, 4, 1), 50.0), Error);
}

EvalReport sample_report() {
  EvalReport r;
  r.protocol = "counterfactual";
  r.config_hash = "abc";
  r.records = {{"a", "ig", false, "", {{"drop", 0.5}}},
               {"b", "ig", false, "", {{"drop", 0.25}}},
               {"c", "ig", true, "boom", {}},
               {"a", "diff", false, "", {{"drop", 0.75}}}};
  r.recompute_aggregates();
  r.summary["note"] = 1;
  return r;
}

TEST(EvalReport, AggregatesSkipFailures) {
  const auto r = sample_report();
  const auto& ig = r.aggregate("ig", "drop");
  EXPECT_EQ(ig.n, 2u);
  EXPECT_DOUBLE_EQ(ig.mean, 0.375);
  EXPECT_NEAR(ig.std, std::sqrt(0.03125), 1e-12);
  EXPECT_EQ(r.aggregate("diff", "drop").n, 1u);
}

TEST(EvalReport, JsonRoundTrip) {
  const auto r = sample_report();
  const auto back = EvalReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  EXPECT_TRUE(back.records[2].failed);
  EXPECT_NE(r.markdown().find("drop"), std::string::npos);
}

TEST(EvalReport, TamperedAggregateRejected) {
  auto j = sample_report().to_json();
  j["aggregates"]["ig/drop"]["mean"] = 0.9;
  try {
    EvalReport::from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(ClassAgreement, UntrainedGeneratorIsNearChance) {
  // An untrained generator carries no class signal, so balanced accuracy
  // sits near chance.
  const auto& c = testing::trained_classifier();
  GeneratorModel g(testing::small_generator_arch(), 77);
  const auto report = class_agreement(g, c, 200, 5, 1);
  EXPECT_EQ(report.summary.at("n_images"), 400);
  EXPECT_NEAR(report.summary.at("balanced_accuracy").get<double>(), 0.5, 0.05);
}

TEST(ClassAgreement, CountsAndDeterminism) {
  const auto& c = testing::trained_classifier();
  GeneratorModel g(testing::small_generator_arch(), 78);
  const auto a = class_agreement(g, c, 10, 5, 3);
  const auto b = class_agreement(g, c, 10, 5, 3);
  EXPECT_EQ(a.records.size(), 40u);
  EXPECT_EQ(a.to_json(), b.to_json());
}

}  // namespace
}  // namespace medxgan

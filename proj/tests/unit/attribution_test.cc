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
#include "medxgan/attribution.hpp"
#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/phantom.hpp"
#include "medxgan/render.hpp"

namespace medxgan {
namespace {

Image positive_image(std::uint64_t s = 31) {
  return generate_sample(s, s + 1, testing::small_params()).pixels;
}

double positive_score(const ClassifierModel& c, const Image& x) {
  return predict(c, x).softmax[kPositiveClass];
}

double sum(const Image& m) {
  double s = 0;
  for (float v : m.values()) s += v;
  return s;
}

TEST(DifferenceMap, ZeroOnIdenticalInputs) {
  const Image x = positive_image();
  const auto m = difference_map(x, x);
  for (float v : m.values.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_TRUE(m.is_signed);
}

TEST(DifferenceMap, Antisymmetric) {
  const Image a = positive_image(1), b = positive_image(2);
  const auto ab = difference_map(a, b), ba = difference_map(b, a);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(ab.values[i], -ba.values[i]);
  const Image mag = ab.magnitude();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(mag[i], std::fabs(ab.values[i]));
}

TEST(DifferenceMap, ShapeMismatch) {
  EXPECT_THROW(difference_map(Image(4, 4), Image(4, 5)), Error);
}

TEST(DifferenceMap, PhantomPairsLocalizePathology) {
  // Oracle: the phantom's interior and ground-truth mask.
  const auto p = testing::small_params();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto pos = generate_sample(s, s + 7, p);
    const auto neg = generate_sample(s, std::nullopt, p);
    const auto m = difference_map(pos.pixels, neg.pixels);
    const Mask interior = organ_interior(s, p);
    std::size_t peak = 0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (m.values[i] != 0.0f) EXPECT_TRUE(interior[i]) << i;
      if (std::fabs(m.values[i]) > std::fabs(m.values[peak])) peak = i;
    }
    EXPECT_TRUE((*pos.mask)[peak]);
  }
}

TEST(InterpolationSchedule, DefaultGrid) {
  const auto a = InterpolationSchedule{4, {}}.alphas();
  ASSERT_EQ(a.size(), 5u);
  EXPECT_EQ(a.front(), 0.0);
  EXPECT_EQ(a.back(), 1.0);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_GT(a[i], a[i - 1]);
  const auto ten = InterpolationSchedule{10, 0.1}.alphas();
  EXPECT_EQ(ten.back(), 1.0);
  EXPECT_THROW((InterpolationSchedule{0, {}}.alphas()), Error);
}

class AttributionTest : public ::testing::Test {
 protected:
  const ClassifierModel& c = testing::trained_classifier();
  GeneratorModel g{testing::small_generator_arch(), 13};
  LatentCode code = [] {
    Rng rng(4);
    return sample_latent(1, LabelPolicy::kAllPositive, 12, 4, rng)[0];
  }();
};

TEST_F(AttributionTest, SweepEndpointsAreBitExact) {
  const auto sweep = interpolation_sweep(g, c, code, {10, {}});
  ASSERT_EQ(sweep.frames.size(), 11u);
  LatentCode neg = code;
  std::fill(neg.z2.begin(), neg.z2.end(), 0.0f);
  EXPECT_EQ(sweep.frames.front(), generate(g, neg));
  EXPECT_EQ(sweep.frames.back(), generate(g, code));
  for (float v : sweep.accumulated.front().values()) EXPECT_EQ(v, 0.0f);
  EXPECT_GE(sweep.monotonicity_fraction, 0.0);
  EXPECT_LE(sweep.monotonicity_fraction, 1.0);
  for (std::size_t k = 1; k < sweep.accumulated.size(); ++k) {
    for (std::size_t i = 0; i < sweep.accumulated[k].size(); ++i) {
      EXPECT_GE(sweep.accumulated[k][i], sweep.accumulated[k - 1][i]);
    }
  }
}

TEST_F(AttributionTest, SweepRejectsZeroPathologyCode) {
  LatentCode neg = code;
  std::fill(neg.z2.begin(), neg.z2.end(), 0.0f);
  EXPECT_THROW(interpolation_sweep(g, c, neg, {10, {}}), Error);
}

TEST_F(AttributionTest, GradCamIsNonnegativeAndSized) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = gradcam(c, positive_image(s), kPositiveClass, "block3");
    EXPECT_EQ(m.values.height(), 32);
    EXPECT_FALSE(m.is_signed);
    for (float v : m.values.values()) EXPECT_GE(v, 0.0f);
    EXPECT_NO_THROW(m.validate());
  }
}

TEST_F(AttributionTest, GradCamMatchesLoopReference) {
  // Straight-line oracle: explicit channel pooling, weighted sum, rectify
  // and align-corners-off bilinear upsampling.
  const Image x = positive_image(3);
  const auto cap = capture_features(c, x, "block2", kPositiveClass);
  const auto A = cap.features.accessor<float, 3>();
  const auto G = cap.grads.accessor<float, 3>();
  const int K = static_cast<int>(cap.features.size(0));
  const int h = static_cast<int>(cap.features.size(1));
  const int w = static_cast<int>(cap.features.size(2));
  std::vector<double> alpha(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) alpha[k] += G[k][i][j];
    }
    alpha[k] /= h * w;
  }
  std::vector<double> cam(static_cast<std::size_t>(h) * w, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += alpha[k] * A[k][i][j];
      cam[i * w + j] = std::max(0.0, s);
    }
  }
  auto source = [](int dst, int in, int out, int& i0, int& i1, double& frac) {
    const double src = std::max(0.0, (dst + 0.5) * static_cast<double>(in) / out - 0.5);
    i0 = static_cast<int>(src);
    i1 = std::min(i0 + 1, in - 1);
    frac = src - i0;
  };
  const auto map = gradcam(c, x, kPositiveClass, "block2");
  for (int r = 0; r < 32; ++r) {
    int r0, r1, c0, c1;
    double fr, fc;
    source(r, h, 32, r0, r1, fr);
    for (int col = 0; col < 32; ++col) {
      source(col, w, 32, c0, c1, fc);
      const double v = (1 - fr) * ((1 - fc) * cam[r0 * w + c0] + fc * cam[r0 * w + c1]) +
                       fr * ((1 - fc) * cam[r1 * w + c0] + fc * cam[r1 * w + c1]);
      EXPECT_NEAR(map.values(r, col), v, 1e-5);
    }
  }
}

TEST_F(AttributionTest, GradCamScalesWithScore) {
  const Image x = positive_image(4);
  const auto m1 = gradcam(c, x, kPositiveClass, "block3");
  const auto m3 = gradcam(c, x, kPositiveClass, "block3", 3.0);
  double max1 = 0;
  for (std::size_t i = 0; i < m1.values.size(); ++i) {
    EXPECT_NEAR(m3.values[i], 3.0f * m1.values[i], 1e-5 * (1.0 + std::fabs(m3.values[i])));
    max1 = std::max(max1, static_cast<double>(m1.values[i]));
  }
  const auto arg1 = std::max_element(m1.values.values().begin(), m1.values.values().end()) -
                    m1.values.values().begin();
  const auto arg3 = std::max_element(m3.values.values().begin(), m3.values.values().end()) -
                    m3.values.values().begin();
  if (max1 > 0) EXPECT_EQ(arg1, arg3);
}

TEST_F(AttributionTest, GradCamWithZeroGradientsIsZero) {
  const auto cap = capture_features(c, positive_image(), "block2", kPositiveClass);
  const auto m = gradcam_from_capture(cap.features, torch::zeros_like(cap.grads), 32, 32);
  for (float v : m.values.values()) EXPECT_EQ(v, 0.0f);
}

TEST_F(AttributionTest, GradCamRejectsUnknownLayer) {
  EXPECT_THROW(gradcam(c, positive_image(), kPositiveClass, "block7"), Error);
}

TEST_F(AttributionTest, IntegratedGradientsCompleteness) {
  const Image x = positive_image(5);
  const Image zero(32, 32, 0.0f);
  const double delta = positive_score(c, x) - positive_score(c, zero);
  ASSERT_GT(std::fabs(delta), 0.05);
  const auto m128 = integrated_gradients(c, x, std::nullopt, 128);
  EXPECT_NEAR(sum(m128.values), delta, 0.02 * std::fabs(delta));
  // Dense-step oracle.
  const auto m2048 = integrated_gradients(c, x, std::nullopt, 2048);
  EXPECT_NEAR(sum(m2048.values), delta, 0.005 * std::fabs(delta));
  EXPECT_NEAR(sum(m128.values), sum(m2048.values), 0.02 * std::fabs(delta));
}

TEST_F(AttributionTest, IntegratedGradientsStepDoublingConverges) {
  const Image x = positive_image(6);
  const auto a = integrated_gradients(c, x, std::nullopt, 128);
  const auto b = integrated_gradients(c, x, std::nullopt, 256);
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    diff += std::fabs(a.values[i] - b.values[i]);
    norm += std::fabs(a.values[i]);
  }
  ASSERT_GT(norm, 0.0);
  EXPECT_LT(diff / norm, 0.01);
}

TEST_F(AttributionTest, IntegratedGradientsBaselineEqualsImage) {
  const Image x = positive_image(7);
  const auto m = integrated_gradients(c, x, x, 16);
  for (float v : m.values.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(integrated_gradients(c, x, Image(8, 8), 16), Error);
  EXPECT_THROW(integrated_gradients(c, x, std::nullopt, 0), Error);
}

TEST_F(AttributionTest, LatentIntegratedGradientsRejectsZeroZ2) {
  LatentCode neg = code;
  std::fill(neg.z2.begin(), neg.z2.end(), 0.0f);
  try {
    latent_integrated_gradients(g, c, neg, 8);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

TEST_F(AttributionTest, LatentIntegratedGradientsSupportInDifference) {
  const auto m = latent_integrated_gradients(g, c, code, 16);
  LatentCode neg = code;
  std::fill(neg.z2.begin(), neg.z2.end(), 0.0f);
  const auto diff = difference_map(generate(g, code), generate(g, neg));
  double lmax = 0, dmax = 0;
  for (std::size_t i = 0; i < diff.values.size(); ++i) {
    lmax = std::max(lmax, static_cast<double>(std::fabs(m.values[i])));
    dmax = std::max(dmax, static_cast<double>(std::fabs(diff.values[i])));
  }
  for (std::size_t i = 0; i < diff.values.size(); ++i) {
    if (std::fabs(m.values[i]) > 1e-6 * lmax) EXPECT_GT(std::fabs(diff.values[i]), 1e-6 * dmax);
    if (diff.values[i] == 0.0f) EXPECT_EQ(m.values[i], 0.0f);
  }
}

TEST_F(AttributionTest, LatentIntegratedGradientsMatchesLoopReference) {
  // Oracle: per-alpha single-image gradients averaged by hand.
  const int steps = 4;
  const auto m = latent_integrated_gradients(g, c, code, steps);
  LatentCode neg = code;
  std::fill(neg.z2.begin(), neg.z2.end(), 0.0f);
  const Image pos_img = generate(g, code), neg_img = generate(g, neg);
  std::vector<double> mean(pos_img.size(), 0.0);
  for (int k = 0; k < steps; ++k) {
    LatentCode at = code;
    for (auto& v : at.z2) v = static_cast<float>((k + 0.5) / steps * v);
    const Image grad = input_gradient(c, generate(g, at), kPositiveClass);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += grad[i] / steps;
  }
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double expected = (pos_img[i] - neg_img[i]) * mean[i];
    EXPECT_NEAR(m.values[i], expected, 1e-6 + 1e-4 * std::fabs(expected));
  }
}

TEST_F(AttributionTest, MapSaveLoadRoundTrip) {
  const auto dir = testing::scratch_dir("map_io");
  const Image x = positive_image(8);
  auto m = integrated_gradients(c, x, std::nullopt, 8);
  m.sources["image"] = "test";
  const auto paths = save_map(m, dir, "ig", &x);
  EXPECT_EQ(paths.size(), 3u);
  const auto back = load_map(dir, "ig");
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.method, AttributionMethod::kIg);
  EXPECT_EQ(back.sources.at("image"), "test");
  // A tampered binary no longer matches its sidecar.
  auto bytes = read_bytes(dir / "ig.f32");
  bytes[0] ^= 0xff;
  write_bytes(dir / "ig.f32", bytes);
  try {
    load_map(dir, "ig");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHashMismatch);
  }
}

TEST(Render, JetEndpointsAndStrip) {
  EXPECT_EQ(jet(0.0).b, 128);
  EXPECT_EQ(jet(1.0).r, 128);
  EXPECT_EQ(jet(0.5).g, 255);
  InterpolationSweep sweep;
  for (int k = 0; k < 3; ++k) {
    sweep.frames.emplace_back(32, 32, 0.1f * k);
    sweep.accumulated.emplace_back(32, 32, 0.05f * k);
    ClassifierOutput o;
    o.softmax = {0.7, 0.3};
    sweep.outputs.push_back(o);
  }
  const auto strip = render_film_strip(sweep);
  EXPECT_EQ(strip.width(), 3 * 32 + 2 * 2);
  EXPECT_GT(strip.height(), 64);
}

}  // namespace
}  // namespace medxgan

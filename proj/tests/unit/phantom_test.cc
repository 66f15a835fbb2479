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
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/phantom.hpp"

namespace medxgan {
namespace {

TEST(GenerateSample, NegativeIsDeterministic) {
  const PhantomParams p;
  const auto a = generate_sample(7, std::nullopt, p);
  const auto b = generate_sample(7, std::nullopt, p);
  EXPECT_EQ(a.label, 0);
  EXPECT_FALSE(a.mask.has_value());
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.pixels.height(), 64);
}

TEST(GenerateSample, PixelsInUnitRange) {
  const PhantomParams p;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = generate_sample(s, s + 100, p);
    for (float v : x.pixels.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(GenerateSample, PathologyIsAdditiveInsideOrgan) {
  const PhantomParams p;
  const auto neg = generate_sample(7, std::nullopt, p);
  const auto pos = generate_sample(7, 3, p);
  ASSERT_EQ(pos.label, 1);
  ASSERT_TRUE(pos.mask.has_value());
  const Mask organ = organ_region(7, p);
  double l1 = 0.0;
  for (std::size_t i = 0; i < neg.pixels.size(); ++i) {
    const double d = std::fabs(pos.pixels[i] - neg.pixels[i]);
    if (!organ[i]) EXPECT_EQ(d, 0.0) << "pixel " << i;
    l1 += d;
  }
  EXPECT_GT(l1, 0.0);
}

TEST(GenerateSample, MaskStrictlyInsideInterior) {
  const PhantomParams p;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const auto pos = generate_sample(s, 1000 + s, p);
    const Mask interior = organ_interior(s, p);
    std::size_t area = 0;
    for (std::size_t i = 0; i < interior.size(); ++i) {
      if ((*pos.mask)[i]) {
        EXPECT_TRUE(interior[i]);
        ++area;
      }
    }
    EXPECT_GT(area, 0u);
  }
}

TEST(GenerateSample, RealizationsShareAnatomyOffMasks) {
  const PhantomParams p;
  const auto a = generate_sample(7, 3, p);
  const auto b = generate_sample(7, 4, p);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    if ((*a.mask)[i] || (*b.mask)[i]) continue;
    EXPECT_NEAR(a.pixels[i], b.pixels[i], 1e-6);
    ++compared;
  }
  EXPECT_GT(compared, a.pixels.size() / 2);
  EXPECT_NE(a.pixels, b.pixels);
}

TEST(GenerateSample, MaskIsHalfMaximumSet) {
  // Inside the mask the blob adds at least half of blob_delta (before
  // clamping); outside it adds nothing.
  const PhantomParams p;
  const auto neg = generate_sample(11, std::nullopt, p);
  const auto pos = generate_sample(11, 2, p);
  for (std::size_t i = 0; i < neg.pixels.size(); ++i) {
    const double d = pos.pixels[i] - neg.pixels[i];
    if ((*pos.mask)[i]) {
      EXPECT_GE(d, std::min(0.5 * p.blob_delta, 1.0 - neg.pixels[i]) - 1e-6);
    } else {
      EXPECT_EQ(d, 0.0);
    }
  }
}

TEST(PhantomParams, RejectsBlobsThatCannotFit) {
  PhantomParams p;
  p.blob_sigma_min = 0.5;
  p.blob_sigma_max = 0.6;
  EXPECT_THROW(p.validate(), Error);
  EXPECT_THROW(generate_sample(1, 1, p), Error);
}

TEST(PhantomParams, JsonRejectsUnknownKeys) {
  json j = PhantomParams{};
  j["blob_count"] = 2;
  try {
    (void)j.get<PhantomParams>();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(BuildDataset, CountsAndBalance) {
  const auto dir = testing::scratch_dir("ds");
  const auto m = build_dataset(testing::small_params(), 10, 1, dir / "d");
  EXPECT_EQ(m.samples.size(), 20u);
  EXPECT_EQ(m.count_negative, 10);
  EXPECT_EQ(m.count_positive, 10);
  int positives = 0;
  for (const auto& e : m.samples) {
    positives += e.label;
    EXPECT_EQ(e.mask_file.has_value(), e.label == 1);
  }
  EXPECT_EQ(positives, 10);
}

TEST(BuildDataset, LargeDatasetIsExactlyBalanced) {
  const auto dir = testing::scratch_dir("ds_large");
  const auto m = build_dataset(testing::small_params(), 1000, 1, dir / "d");
  double mean = 0.0;
  for (const auto& e : m.samples) mean += e.label;
  EXPECT_EQ(mean / static_cast<double>(m.samples.size()), 0.5);
}

TEST(BuildDataset, RebuildIsByteIdentical) {
  const auto dir = testing::scratch_dir("ds_rebuild");
  build_dataset(testing::small_params(), 5, 9, dir / "a");
  build_dataset(testing::small_params(), 5, 9, dir / "b");
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir / "a");
    EXPECT_EQ(sha256_file(e.path()), sha256_file(dir / "b" / rel)) << rel;
  }
}

TEST(BuildDataset, RefusesNonEmptyDirectoryWithoutOverwrite) {
  const auto dir = testing::scratch_dir("ds_refuse");
  build_dataset(testing::small_params(), 2, 1, dir / "d");
  EXPECT_THROW(build_dataset(testing::small_params(), 2, 1, dir / "d"), Error);
  EXPECT_NO_THROW(build_dataset(testing::small_params(), 2, 1, dir / "d", true));
}

TEST(LoadDataset, RoundTripsPixelsAndMasks) {
  const auto dir = testing::scratch_dir("ds_load");
  const auto p = testing::small_params();
  const auto m = build_dataset(p, 4, 2, dir / "d");
  const Dataset ds = load_dataset(dir / "d");
  ASSERT_EQ(ds.size(), m.samples.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& e = m.samples[i];
    const auto fresh = generate_sample(e.structure_seed, e.pathology_seed, p);
    EXPECT_EQ(ds.samples[i].label, e.label);
    EXPECT_EQ(ds.samples[i].mask, fresh.mask);
    Image quantized = fresh.pixels;
    for (auto& v : quantized.values()) v = std::round(v * 255.0f) / 255.0f;
    for (std::size_t k = 0; k < quantized.size(); ++k) {
      EXPECT_NEAR(ds.samples[i].pixels[k], quantized[k], 1e-6);
    }
  }
  EXPECT_EQ(ds.manifest.content_hash(), m.content_hash());
}

TEST(LoadDataset, MissingManifestIsMissingArtifact) {
  const auto dir = testing::scratch_dir("ds_missing");
  try {
    load_dataset(dir / "nothing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingArtifact);
  }
}

TEST(Phantom, ClassesAreSeparableByMaskedIntensity) {
  // Oracle: positives carry extra mass inside the organ interior.
  const PhantomParams p;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto neg = generate_sample(s, std::nullopt, p);
    const auto pos = generate_sample(s, s + 50, p);
    const double sn = std::accumulate(neg.pixels.values().begin(), neg.pixels.values().end(), 0.0);
    const double sp = std::accumulate(pos.pixels.values().begin(), pos.pixels.values().end(), 0.0);
    EXPECT_GT(sp, sn);
  }
}

}  // namespace
}  // namespace medxgan

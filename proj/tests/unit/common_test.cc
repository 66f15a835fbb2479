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
#include <filesystem>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/rng.hpp"

namespace medxgan {
namespace {

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next(), b.next());
  }
  Rng c(42), d(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(c.normal(), d.normal());
  }
}

TEST(Rng, UniformRangeAndIntBounds) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const int k = rng.uniform_int(-2, 3);
    EXPECT_GE(k, -2);
    EXPECT_LE(k, 3);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(9);
  constexpr int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0, 0.05);
}

TEST(DeriveSeed, DistinctAndStable) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_LT(derive_seed(123456789, "x"), std::uint64_t{1} << 32);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex(std::string_view("")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Io, PngRoundTripOfQuantizedImage) {
  const auto dir = testing::scratch_dir("png");
  Image img(5, 7);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 256) / 255.0f;
  write_png(dir / "a.png", img);
  EXPECT_EQ(read_png_image(dir / "a.png"), img);

  Mask m(4, 3, 0);
  m(1, 2) = 1;
  write_png(dir / "m.png", m);
  EXPECT_EQ(read_png_mask(dir / "m.png"), m);
}

TEST(Io, FloatGridRoundTrip) {
  const auto dir = testing::scratch_dir("f32");
  Image g(3, 4);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -1.5f + 0.37f * static_cast<float>(i);
  write_f32_grid(dir / "g.f32", g);
  EXPECT_EQ(read_f32_grid(dir / "g.f32", 3, 4), g);
  EXPECT_THROW(read_f32_grid(dir / "g.f32", 4, 4), Error);
}

TEST(Io, JsonErrorsCarryCodes) {
  const auto dir = testing::scratch_dir("json");
  try {
    read_json(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingArtifact);
  }
  write_text(dir / "bad.json", "{not json");
  try {
    read_json(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Io, CanonicalDumpIgnoresInsertionOrder) {
  json a = {{"b", 1}, {"a", 2}};
  json b;
  b["a"] = 2;
  b["b"] = 1;
  EXPECT_EQ(canonical_dump(a), canonical_dump(b));
}

}  // namespace
}  // namespace medxgan

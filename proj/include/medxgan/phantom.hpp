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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medxgan/grid.hpp"

namespace medxgan {

// Parameters of the synthetic "anatomy + optional pathology" phantom. Lengths
// are fractions of the image side so one parameter set serves every size.
struct PhantomParams {
  int image_size = 64;

  double background = 0.08;
  double organ_level = 0.40;
  double rim_level = 0.65;
  double rim_width = 0.04;
  double organ_axis_min = 0.30;  // ellipse semi-axes
  double organ_axis_max = 0.40;
  double organ_center_jitter = 0.05;
  double organ_max_rotation = 0.3;  // radians

  int ridge_min = 3;
  int ridge_max = 6;
  double ridge_amplitude = 0.12;
  double ridge_width = 0.0125;  // Gaussian profile sigma
  double texture_amplitude = 0.03;
  double noise_level = 0.01;

  int blob_min = 1;
  int blob_max = 3;
  double blob_sigma_min = 0.07;
  double blob_sigma_max = 0.11;
  double blob_delta = 0.30;

  // Throws Error(kConfig) on inconsistent ranges, including blobs that cannot
  // fit inside the smallest organ interior.
  void validate() const;

  friend bool operator==(const PhantomParams&, const PhantomParams&) = default;
};

void to_json(nlohmann::json& j, const PhantomParams& p);
// Rejects unknown keys; absent keys keep their defaults.
void from_json(const nlohmann::json& j, PhantomParams& p);

struct ImageSample {
  Image pixels;
  int label = 0;
  std::optional<Mask> mask;  // present iff label == 1
  std::uint64_t structure_seed = 0;
  std::optional<std::uint64_t> pathology_seed;
};

// Anatomy is a pure function of structure_seed; pathology blobs are added
// strictly inside the organ interior and are zero outside the returned mask.
ImageSample generate_sample(std::uint64_t structure_seed,
                            std::optional<std::uint64_t> pathology_seed,
                            const PhantomParams& params);

// Organ region and its interior (organ minus boundary rim) for a structure.
Mask organ_region(std::uint64_t structure_seed, const PhantomParams& params);
Mask organ_interior(std::uint64_t structure_seed, const PhantomParams& params);

struct DatasetEntry {
  std::string file;  // relative to the dataset root
  int label = 0;
  std::uint64_t structure_seed = 0;
  std::optional<std::uint64_t> pathology_seed;
  std::optional<std::string> mask_file;
};

struct DatasetManifest {
  static constexpr const char* kVersion = "1";
  std::string version = kVersion;
  int image_size = 0;
  int count_negative = 0;
  int count_positive = 0;
  std::uint64_t root_seed = 0;
  PhantomParams generator_params;
  std::vector<DatasetEntry> samples;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  // Hash of the canonical manifest text; identifies the dataset content.
  std::string content_hash() const;
};

// Writes images/{neg|pos}/NNNNN.png, masks/NNNNN.png and manifest.json.
// Negatives take indices [0, n), positives [n, 2n). A non-empty out_dir is
// refused unless overwrite is set, in which case it is cleared first.
DatasetManifest build_dataset(const PhantomParams& params, int n_per_class,
                              std::uint64_t root_seed,
                              const std::filesystem::path& out_dir,
                              bool overwrite = false);

// In-memory dataset loaded back from PNGs.
struct Dataset {
  DatasetManifest manifest;
  std::filesystem::path root;
  std::vector<ImageSample> samples;

  std::size_t size() const { return samples.size(); }
};

Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace medxgan

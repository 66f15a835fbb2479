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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medxgan/attribution.hpp"
#include "medxgan/classifier.hpp"
#include "medxgan/gan.hpp"
#include "medxgan/grid.hpp"
#include "medxgan/inversion.hpp"

namespace medxgan {

// One evaluated unit. Aggregates are computed per (group, metric) over the
// records that did not fail.
struct EvalRecord {
  std::string id;
  std::string group;  // attribution method, or empty
  bool failed = false;
  std::string failure;
  std::map<std::string, double> metrics;
};

struct EvalReport {
  std::string protocol;
  std::string config_hash;
  std::vector<EvalRecord> records;
  // Keyed "metric" or "group/metric".
  std::map<std::string, MeanStd> aggregates;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json checkpoints = nlohmann::json::object();

  void recompute_aggregates();
  const MeanStd& aggregate(const std::string& group, const std::string& metric) const;

  nlohmann::json to_json() const;
  // Throws Error(kConfig) when a stored aggregate disagrees with the records.
  static EvalReport from_json(const nlohmann::json& j);
  std::string markdown() const;
};

std::map<std::string, MeanStd> compute_aggregates(const std::vector<EvalRecord>& records);

// For each of n_structures z1 draws: one negative (z2 = 0) and
// positives_per_structure positive realizations, classified by C.
// Summary: accuracy, balanced_accuracy, auc.
EvalReport class_agreement(const GeneratorModel& g, const ClassifierModel& c, int n_structures,
                           std::uint64_t seed, int positives_per_structure = 3);

enum class SelectionRule { kTopPercent, kThreshold };

struct PerturbationSpec {
  SelectionRule rule = SelectionRule::kTopPercent;
  double value = 10.0;  // q in (0, 100] or threshold t

  void validate() const;
};

void to_json(nlohmann::json& j, const PerturbationSpec& s);
void from_json(const nlohmann::json& j, PerturbationSpec& s);

// Row-major indices of the k = floor(q * N / 100) largest |value| pixels,
// ties broken by index. Empty for an all-zero map.
std::vector<std::size_t> top_percent_indices(const Image& map, double q);

// Pixels chosen by `spec`; depends only on the map.
Mask select_pixels(const Image& map, const PerturbationSpec& spec);

struct PerturbationResult {
  Image image;
  Mask selected;
  float fill = 0.0f;
  std::size_t count = 0;
  bool empty_selection = false;
};

// Selected pixels take `fill`, by default the mean intensity of `image`.
PerturbationResult perturb(const Image& image, const Image& map, const PerturbationSpec& spec,
                           std::optional<float> fill = std::nullopt);

struct NamedImage {
  std::string id;
  Image image;
};

// drop = softmax_pos(x) - softmax_pos(perturb(x)) per (image, method), with
// maps_by_method[method][i] belonging to images[i].
EvalReport counterfactual_drop(const ClassifierModel& c, const std::vector<NamedImage>& images,
                               const std::map<std::string, std::vector<Image>>& maps_by_method,
                               const PerturbationSpec& spec);

inline constexpr double kDefaultRelativeTolerance = 1e-6;

struct LocalizationCounts {
  std::size_t lig = 0;
  std::size_t ig = 0;
  double ratio = 0.0;
};

// count(|lig| > tol max|lig|) / count(|ig| > tol max|ig|). Throws
// Error(kUndefined) when the IG count is zero.
LocalizationCounts localization_ratio(const Image& lig, const Image& ig,
                                      double relative_tol = kDefaultRelativeTolerance);

// Share of the top-q% |value| pixels that lie inside the mask.
double mask_overlap(const Image& map, const Mask& mask, double q);

}  // namespace medxgan

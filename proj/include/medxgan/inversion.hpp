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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medxgan/classifier.hpp"
#include "medxgan/gan.hpp"
#include "medxgan/grid.hpp"

namespace medxgan {

struct InversionOptions {
  int iterations = 2000;
  double learning_rate = 1e-2;
  double mse_weight = 1.0;
  double bce_weight = 1.0;
};

void to_json(nlohmann::json& j, const InversionOptions& o);
void from_json(const nlohmann::json& j, InversionOptions& o);

// One optimizer iteration. mse/bce belong to the best iterate seen so far
// (so the trace is non-increasing in their weighted sum); current_* are the
// losses of the iterate actually evaluated at this iteration.
struct TraceRow {
  int iteration = 0;
  double mse = 0.0;
  double bce = 0.0;
  double current_mse = 0.0;
  double current_bce = 0.0;
};

struct InversionResult {
  LatentCode code;  // best iterate; intended_label = 1
  Image recon;      // generate(G, code), bit-exact
  double final_mse = 0.0;
  double final_bce = 0.0;
  std::vector<TraceRow> trace;
  std::uint64_t seed = 0;

  double initial_total(const InversionOptions& o) const;
  double final_total(const InversionOptions& o) const;

  nlohmann::json to_json() const;  // code + finals + seed; trace goes to CSV
  static InversionResult from_json(const nlohmann::json& j);
  std::string trace_csv() const;
};

// Minimizes mse_weight * MSE(G(z1, z2), x) + bce_weight * BCE(C(G(z1, z2)), C(x))
// over (z1, z2) with Adam from a N(0, I) start drawn from `seed`. The BCE
// target is the classifier's soft positive-class output on x.
InversionResult invert(const GeneratorModel& g, const ClassifierModel& c, const Image& x,
                       const InversionOptions& opts, std::uint64_t seed);

// Independent inversions run as one batch; results match per-image calls up
// to floating-point reassociation.
std::vector<InversionResult> invert_batch(const GeneratorModel& g, const ClassifierModel& c,
                                          std::span<const Image> images,
                                          const InversionOptions& opts,
                                          std::span<const std::uint64_t> seeds);

// generate(G, (z1, 0)) for the recovered z1.
Image negative_realization(const GeneratorModel& g, const InversionResult& result);

// Mean SSIM over all fully-contained 11x11 Gaussian windows (sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1).
double ssim(const Image& a, const Image& b);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct ImageConvergence {
  std::string image_id;
  bool failed = false;
  std::string failure;
  std::vector<double> cosine;     // over [z1; z2], one per restart pair
  std::vector<double> cosine_z1;  // per-vector values for transparency
  std::vector<double> cosine_z2;
  std::vector<double> ssim;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

// Sample standard deviation (n - 1); std = 0 when n < 2.
MeanStd mean_std(std::span<const double> values);

struct ConvergenceReport {
  std::vector<ImageConvergence> images;
  MeanStd cosine;
  MeanStd cosine_z1;
  MeanStd cosine_z2;
  MeanStd ssim;

  nlohmann::json to_json() const;
};

// Runs `restarts` inversions per image with distinct seeds and compares every
// pair of restarts. Per-image failures are recorded, not thrown.
ConvergenceReport convergence_study(const GeneratorModel& g, const ClassifierModel& c,
                                    std::span<const Image> images,
                                    std::span<const std::string> image_ids, int restarts,
                                    const InversionOptions& opts, std::uint64_t base_seed);

}  // namespace medxgan

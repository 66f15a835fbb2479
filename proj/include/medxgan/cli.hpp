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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "medxgan/classifier.hpp"
#include "medxgan/error.hpp"
#include "medxgan/evalsuite.hpp"
#include "medxgan/gan.hpp"
#include "medxgan/inversion.hpp"
#include "medxgan/phantom.hpp"

namespace medxgan {

inline constexpr const char* kCodeVersion = "medxgan 0.1.0";

struct PhantomSection {
  PhantomParams params;
  int n_per_class = 2000;
  int val_per_class = 250;
};

struct ClassifierSection {
  ClassifierArch arch;
  ClassifierHyperParams training;
};

struct InversionSection {
  InversionOptions options;
  int n_images = 20;
};

struct AttributionSection {
  int steps = kDefaultIntegrationSteps;
  int interpolation_steps = 10;
  std::string capture_layer;  // empty selects the last conv block
  std::vector<std::string> methods{"diff", "gradcam", "ig", "lig"};
};

struct EvalSection {
  int n_structures = 1000;
  int positives_per_structure = 3;
  PerturbationSpec perturbation;
  double overlap_q = 5.0;
  int restarts = 3;
  int convergence_images = 5;
  double relative_tol = kDefaultRelativeTolerance;
};

// Every section is optional in the file; absent keys keep their defaults and
// unknown keys are rejected with Error(kConfig).
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_root = "runs";
  PhantomSection phantom;
  ClassifierSection classifier;
  GanTrainConfig gan;
  InversionSection inversion;
  AttributionSection attribution;
  EvalSection eval;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  std::string hash() const;
  void validate() const;
};

// Exit status for a failure of the given kind.
int exit_code_for(ErrorCode code);

// Files under dir (relative, sorted), excluding run_manifest.json.
std::vector<std::string> list_files(const std::filesystem::path& dir);

// Reads dir/run_manifest.json and re-hashes every listed file. Throws
// Error(kMissingArtifact) or Error(kHashMismatch). Returns the manifest.
nlohmann::json verify_artifact(const std::filesystem::path& dir,
                               const std::string& expected_command = "");

// Hash over the manifest fields that do not depend on wall-clock time.
std::string manifest_content_hash(const nlohmann::json& manifest);

// Entry point of the medxgan binary.
int run_cli(int argc, char** argv);

}  // namespace medxgan

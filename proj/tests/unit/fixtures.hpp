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

#include <atomic>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "medxgan/classifier.hpp"
#include "medxgan/gan.hpp"
#include "medxgan/phantom.hpp"

namespace medxgan::testing {

// Fresh directory under the gtest temp root.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::path(::testing::TempDir()) /
                   ("medxgan_" + name + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline PhantomParams small_params() {
  PhantomParams p;
  p.image_size = 32;
  return p;
}

inline ClassifierArch small_arch() {
  ClassifierArch a;
  a.image_size = 32;
  a.widths = {8, 16, 16};
  a.hidden = 16;
  return a;
}

// A classifier trained briefly on 32x32 phantoms, shared across tests.
inline const ClassifierModel& trained_classifier() {
  static const ClassifierModel model = [] {
    const auto dir = scratch_dir("fixture_data");
    build_dataset(small_params(), 300, 5, dir / "train");
    build_dataset(small_params(), 30, 6, dir / "val");
    ClassifierHyperParams hp;
    hp.epochs = 8;
    hp.batch_size = 32;
    auto trained = train_classifier(load_dataset(dir / "train"), load_dataset(dir / "val"),
                                    small_arch(), hp, 3);
    trained.model.freeze();
    return trained.model;
  }();
  return model;
}

inline GeneratorArch small_generator_arch() {
  GeneratorArch a;
  a.image_size = 32;
  a.d1 = 12;
  a.d2 = 4;
  a.width = 16;
  a.pathology_width = 8;
  return a;
}

}  // namespace medxgan::testing

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

#include "medxgan/attribution.hpp"

#include <cmath>
#include <sstream>

#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/render.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {

namespace {

constexpr int kGradientChunk = 32;

std::vector<double> midpoints(int steps) {
  if (steps < 1) throw Error(ErrorCode::kPrecondition, "steps must be >= 1");
  std::vector<double> a(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) a[k] = (k + 0.5) / steps;
  return a;
}

// Mean over the path of d softmax[target] / dx for the [N, 1, H, W] points
// produced by `make_chunk`, processed in chunks.
template <typename MakeChunk>
torch::Tensor mean_path_gradient(const ClassifierModel& c, const std::vector<double>& alphas,
                                 int target_class, MakeChunk make_chunk) {
  torch::Tensor sum;
  for (std::size_t start = 0; start < alphas.size(); start += kGradientChunk) {
    const std::size_t end = std::min(alphas.size(), start + kGradientChunk);
    const std::vector<double> chunk(alphas.begin() + start, alphas.begin() + end);
    const auto points = make_chunk(chunk);
    torch::Tensor grads;
    try {
      grads = input_gradients(c, points, target_class);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      // Locate the first failing alpha for the report.
      for (std::size_t k = 0; k < chunk.size(); ++k) {
        try {
          input_gradients(c, points.slice(0, k, k + 1), target_class);
        } catch (const Error&) {
          throw Error(ErrorCode::kNumeric, "non-finite gradient along the path",
                      {{"alpha", std::to_string(chunk[k])}});
        }
      }
      throw;
    }
    const auto part = grads.to(torch::kDouble).sum(0);
    sum = sum.defined() ? sum + part : part;
  }
  return (sum / static_cast<double>(alphas.size())).to(torch::kFloat);
}

Image tensor_to_image(const torch::Tensor& t) { return to_image(t.contiguous()); }

void check_nonzero_z2(const LatentCode& code) {
  if (code.z2_is_zero()) {
    throw Error(ErrorCode::kPrecondition, "latent code has z2 = 0; path endpoints coincide");
  }
}

LatentCode scaled_code(const LatentCode& code, double alpha) {
  LatentCode out = code;
  if (alpha == 0.0) {
    std::fill(out.z2.begin(), out.z2.end(), 0.0f);
    out.intended_label = 0;
  } else if (alpha != 1.0) {
    for (auto& v : out.z2) v = static_cast<float>(alpha * v);
  }
  return out;
}

}  // namespace

std::string to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::kDiff: return "diff";
    case AttributionMethod::kGradCam: return "gradcam";
    case AttributionMethod::kIg: return "ig";
    case AttributionMethod::kLig: return "lig";
  }
  return "unknown";
}

AttributionMethod parse_method(const std::string& name) {
  if (name == "diff") return AttributionMethod::kDiff;
  if (name == "gradcam") return AttributionMethod::kGradCam;
  if (name == "ig") return AttributionMethod::kIg;
  if (name == "lig") return AttributionMethod::kLig;
  throw Error(ErrorCode::kConfig, "unknown attribution method: " + name);
}

Image AttributionMap::magnitude() const {
  Image out(values.height(), values.width());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::fabs(values[i]);
  return out;
}

void AttributionMap::validate() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNumeric, "attribution map has non-finite values",
                  {{"method", to_string(method)}, {"index", std::to_string(i)}});
    }
    if (!is_signed && values[i] < 0.0f) {
      throw Error(ErrorCode::kPrecondition, "unsigned attribution map has negative values",
                  {{"method", to_string(method)}});
    }
  }
}

std::vector<double> InterpolationSchedule::alphas() const {
  if (steps < 1) throw Error(ErrorCode::kPrecondition, "interpolation steps must be >= 1");
  const double lambda = rate.value_or(1.0 / steps);
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::kPrecondition, "interpolation rate must be positive");
  }
  std::vector<double> a(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) a[k] = k * lambda;
  if (std::fabs(steps * lambda - 1.0) < 1e-12) a.back() = 1.0;
  return a;
}

AttributionMap difference_map(const Image& pos, const Image& neg) {
  if (!pos.same_shape(neg)) {
    throw Error(ErrorCode::kShape, "difference map needs images of equal shape");
  }
  AttributionMap map;
  map.method = AttributionMethod::kDiff;
  map.is_signed = true;
  map.values = Image(pos.height(), pos.width());
  for (std::size_t i = 0; i < pos.size(); ++i) map.values[i] = pos[i] - neg[i];
  return map;
}

InterpolationSweep interpolation_sweep(const GeneratorModel& g, const ClassifierModel& c,
                                       const LatentCode& code,
                                       const InterpolationSchedule& schedule) {
  check_nonzero_z2(code);
  InterpolationSweep sweep;
  sweep.alphas = schedule.alphas();
  for (double alpha : sweep.alphas) {
    sweep.frames.push_back(generate(g, scaled_code(code, alpha)));
    sweep.outputs.push_back(predict(c, sweep.frames.back()));
  }
  const auto& first = sweep.frames.front();
  sweep.accumulated.emplace_back(first.height(), first.width(), 0.0f);
  int non_decreasing = 0;
  for (std::size_t k = 1; k < sweep.frames.size(); ++k) {
    Image acc = sweep.accumulated.back();
    for (std::size_t i = 0; i < acc.size(); ++i) {
      acc[i] += std::fabs(sweep.frames[k][i] - sweep.frames[k - 1][i]);
    }
    sweep.accumulated.push_back(std::move(acc));
    if (sweep.outputs[k].softmax[kPositiveClass] >=
        sweep.outputs[k - 1].softmax[kPositiveClass]) {
      ++non_decreasing;
    }
  }
  sweep.monotonicity_fraction =
      static_cast<double>(non_decreasing) / static_cast<double>(sweep.frames.size() - 1);
  return sweep;
}

AttributionMap gradcam_from_capture(const torch::Tensor& features, const torch::Tensor& grads,
                                    int height, int width) {
  if (features.dim() != 3 || !features.sizes().equals(grads.sizes())) {
    throw Error(ErrorCode::kShape, "grad-cam needs [K, h, w] features and gradients");
  }
  torch::NoGradGuard no_grad;
  const auto weights = grads.mean({1, 2});
  const auto cam = torch::relu((weights.view({-1, 1, 1}) * features).sum(0));
  const auto up = torch::nn::functional::interpolate(
      cam.view({1, 1, cam.size(0), cam.size(1)}),
      torch::nn::functional::InterpolateFuncOptions()
          .size(std::vector<int64_t>{height, width})
          .mode(torch::kBilinear)
          .align_corners(false));
  AttributionMap map;
  map.method = AttributionMethod::kGradCam;
  map.is_signed = false;
  map.values = tensor_to_image(torch::relu(up));
  return map;
}

AttributionMap gradcam(const ClassifierModel& c, const Image& image, int target_class,
                       const std::string& capture_layer, double score_scale) {
  const FeatureCapture cap =
      capture_features(c, image, capture_layer, target_class, score_scale);
  auto map = gradcam_from_capture(cap.features, cap.grads, image.height(), image.width());
  map.sources["capture_layer"] = capture_layer;
  map.sources["target_class"] = target_class;
  return map;
}

AttributionMap integrated_gradients(const ClassifierModel& c, const Image& image,
                                    const std::optional<Image>& baseline, int steps,
                                    int target_class) {
  const Image base = baseline.value_or(Image(image.height(), image.width(), 0.0f));
  if (!base.same_shape(image)) {
    throw Error(ErrorCode::kShape, "baseline must match the image shape");
  }
  const auto alphas = midpoints(steps);
  const auto x = to_tensor(image);
  const auto x0 = to_tensor(base);
  const auto delta = x - x0;
  const auto mean_grad =
      mean_path_gradient(c, alphas, target_class, [&](const std::vector<double>& chunk) {
        const auto a = torch::tensor(chunk, torch::kDouble)
                           .to(torch::kFloat)
                           .view({-1, 1, 1, 1});
        return x0 + a * delta;
      });
  AttributionMap map;
  map.method = AttributionMethod::kIg;
  map.is_signed = true;
  map.values = tensor_to_image(delta * mean_grad);
  map.sources["steps"] = steps;
  map.sources["target_class"] = target_class;
  return map;
}

AttributionMap latent_integrated_gradients(const GeneratorModel& g, const ClassifierModel& c,
                                           const LatentCode& code, int steps) {
  check_nonzero_z2(code);
  if (!c.frozen()) throw Error(ErrorCode::kPrecondition, "classifier must be frozen");
  const auto alphas = midpoints(steps);
  const Image pos = generate(g, code);
  const Image neg = generate(g, scaled_code(code, 0.0));
  g.net->eval();
  const auto mean_grad =
      mean_path_gradient(c, alphas, kPositiveClass, [&](const std::vector<double>& chunk) {
        std::vector<LatentCode> codes;
        for (double a : chunk) codes.push_back(scaled_code(code, a));
        const auto [z1, z2] = to_tensors(codes);
        torch::NoGradGuard no_grad;
        return g.net->forward(z1, z2);
      });
  const auto diff = to_tensor(pos) - to_tensor(neg);
  AttributionMap map;
  map.method = AttributionMethod::kLig;
  map.is_signed = true;
  map.values = tensor_to_image(diff * mean_grad);
  map.sources["steps"] = steps;
  return map;
}

std::vector<std::filesystem::path> save_map(const AttributionMap& map,
                                            const std::filesystem::path& dir,
                                            const std::string& stem, const Image* base) {
  map.validate();
  std::filesystem::create_directories(dir);
  const auto bin = dir / (stem + ".f32");
  const auto meta = dir / (stem + ".json");
  const auto png = dir / (stem + ".png");
  write_f32_grid(bin, map.values);
  write_json(meta, {{"version", "1"},
                    {"method", to_string(map.method)},
                    {"signed", map.is_signed},
                    {"height", map.values.height()},
                    {"width", map.values.width()},
                    {"sources", map.sources},
                    {"values_sha256", sha256_file(bin)}});
  write_png(png, render_map(map, base));
  return {bin, meta, png};
}

AttributionMap load_map(const std::filesystem::path& dir, const std::string& stem) {
  const auto bin = dir / (stem + ".f32");
  const json meta = read_json(dir / (stem + ".json"));
  if (!std::filesystem::exists(bin)) {
    throw Error(ErrorCode::kMissingArtifact, "missing attribution map", {{"path", bin.string()}});
  }
  const auto expected = meta.at("values_sha256").get<std::string>();
  if (sha256_file(bin) != expected) {
    throw Error(ErrorCode::kHashMismatch, "attribution map does not match its sidecar",
                {{"path", bin.string()}});
  }
  AttributionMap map;
  map.method = parse_method(meta.at("method").get<std::string>());
  map.is_signed = meta.at("signed").get<bool>();
  map.sources = meta.at("sources");
  map.values = read_f32_grid(bin, meta.at("height").get<int>(), meta.at("width").get<int>());
  return map;
}

}  // namespace medxgan

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

#include "medxgan/inversion.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "medxgan/error.hpp"
#include "medxgan/rng.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {

namespace {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

std::vector<double> to_doubles(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kDouble).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

std::vector<float> row_floats(const torch::Tensor& t, long row) {
  const auto r = t[row].detach().contiguous();
  return {r.data_ptr<float>(), r.data_ptr<float>() + r.numel()};
}

// Separable, normalized 11-tap Gaussian with sigma 1.5.
std::vector<double> gaussian_window() {
  constexpr int kRadius = 5;
  constexpr double kSigma = 1.5;
  std::vector<double> w(2 * kRadius + 1);
  double sum = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    w[i + kRadius] = std::exp(-(i * i) / (2.0 * kSigma * kSigma));
    sum += w[i + kRadius];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable filtering of `in` (h x w) with window `k`.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * in[static_cast<std::size_t>(r) * w + c + t];
      rows[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[t] * rows[static_cast<std::size_t>(r + t) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const InversionOptions& o) {
  j = {{"iterations", o.iterations},
       {"learning_rate", o.learning_rate},
       {"mse_weight", o.mse_weight},
       {"bce_weight", o.bce_weight}};
}

void from_json(const nlohmann::json& j, InversionOptions& o) {
  read_field(j, "iterations", o.iterations);
  read_field(j, "learning_rate", o.learning_rate);
  read_field(j, "mse_weight", o.mse_weight);
  read_field(j, "bce_weight", o.bce_weight);
}

double InversionResult::initial_total(const InversionOptions& o) const {
  return o.mse_weight * trace.front().current_mse + o.bce_weight * trace.front().current_bce;
}

double InversionResult::final_total(const InversionOptions& o) const {
  return o.mse_weight * final_mse + o.bce_weight * final_bce;
}

nlohmann::json InversionResult::to_json() const {
  return {{"version", "1"},
          {"z1", code.z1},
          {"z2", code.z2},
          {"intended_label", code.intended_label},
          {"final_mse", final_mse},
          {"final_bce", final_bce},
          {"iterations", trace.size()},
          {"seed", seed}};
}

InversionResult InversionResult::from_json(const nlohmann::json& j) {
  InversionResult r;
  try {
    r.code.z1 = j.at("z1").get<std::vector<float>>();
    r.code.z2 = j.at("z2").get<std::vector<float>>();
    r.code.intended_label = j.at("intended_label").get<int>();
    r.final_mse = j.at("final_mse").get<double>();
    r.final_bce = j.at("final_bce").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed inversion result: ") + e.what());
  }
  return r;
}

std::string InversionResult::trace_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "iteration,mse,bce,current_mse,current_bce\n";
  for (const auto& t : trace) {
    out << t.iteration << ',' << t.mse << ',' << t.bce << ',' << t.current_mse << ','
        << t.current_bce << '\n';
  }
  return out.str();
}

std::vector<InversionResult> invert_batch(const GeneratorModel& g, const ClassifierModel& c,
                                          std::span<const Image> images,
                                          const InversionOptions& opts,
                                          std::span<const std::uint64_t> seeds) {
  if (opts.iterations < 1) {
    throw Error(ErrorCode::kPrecondition, "inversion needs at least one iteration");
  }
  if (images.empty() || images.size() != seeds.size()) {
    throw Error(ErrorCode::kPrecondition, "inversion needs one seed per image");
  }
  if (!c.frozen()) throw Error(ErrorCode::kPrecondition, "classifier must be frozen");
  for (const auto& img : images) {
    if (img.height() != g.arch.image_size || img.width() != g.arch.image_size) {
      throw Error(ErrorCode::kShape, "image does not match the generator output size");
    }
  }
  g.net->eval();
  set_requires_grad(*g.net, false);

  const long b = static_cast<long>(images.size());
  const auto x = to_batch(images);
  torch::Tensor target;
  {
    torch::NoGradGuard no_grad;
    target = c.softmax(x).select(1, kPositiveClass).clamp(0.0, 1.0);
  }

  auto z1 = torch::empty({b, g.arch.d1});
  auto z2 = torch::empty({b, g.arch.d2});
  for (long i = 0; i < b; ++i) {
    Rng rng(seeds[i]);
    for (long k = 0; k < g.arch.d1; ++k) z1[i][k] = rng.normal();
    for (long k = 0; k < g.arch.d2; ++k) z2[i][k] = rng.normal();
  }
  z1.set_requires_grad(true);
  z2.set_requires_grad(true);
  torch::optim::Adam optimizer({z1, z2}, torch::optim::AdamOptions(opts.learning_rate));

  std::vector<InversionResult> results(static_cast<std::size_t>(b));
  std::vector<double> best_total(b, std::numeric_limits<double>::infinity());
  std::vector<double> best_mse(b), best_bce(b);
  auto best_z1 = z1.detach().clone();
  auto best_z2 = z2.detach().clone();
  const double eps = kProbabilityEpsilon;

  for (int it = 0; it < opts.iterations; ++it) {
    optimizer.zero_grad();
    const auto out = g.net->forward(z1, z2);
    const auto mse = (out - x).pow(2).mean({1, 2, 3});
    const auto p = c.softmax(out).select(1, kPositiveClass).clamp(eps, 1.0 - eps);
    const auto bce = -(target * torch::log(p) + (1.0 - target) * torch::log(1.0 - p));
    const auto total = opts.mse_weight * mse + opts.bce_weight * bce;

    const auto mse_v = to_doubles(mse), bce_v = to_doubles(bce);
    for (long i = 0; i < b; ++i) {
      const double t = opts.mse_weight * mse_v[i] + opts.bce_weight * bce_v[i];
      if (!std::isfinite(t)) {
        throw Error(ErrorCode::kNumeric, "non-finite inversion loss",
                    {{"iteration", std::to_string(it)},
                     {"image", std::to_string(i)},
                     {"mse", std::to_string(mse_v[i])},
                     {"bce", std::to_string(bce_v[i])}});
      }
      if (t < best_total[i]) {
        best_total[i] = t;
        best_mse[i] = mse_v[i];
        best_bce[i] = bce_v[i];
        torch::NoGradGuard no_grad;
        best_z1[i].copy_(z1[i]);
        best_z2[i].copy_(z2[i]);
      }
      results[i].trace.push_back({it, best_mse[i], best_bce[i], mse_v[i], bce_v[i]});
    }
    total.sum().backward();
    optimizer.step();
  }

  for (long i = 0; i < b; ++i) {
    InversionResult& r = results[i];
    r.code.z1 = row_floats(best_z1, i);
    r.code.z2 = row_floats(best_z2, i);
    r.code.intended_label = 1;
    r.recon = generate(g, r.code);
    r.final_mse = best_mse[i];
    r.final_bce = best_bce[i];
    r.seed = seeds[i];
  }
  return results;
}

InversionResult invert(const GeneratorModel& g, const ClassifierModel& c, const Image& x,
                       const InversionOptions& opts, std::uint64_t seed) {
  return std::move(invert_batch(g, c, std::span(&x, 1), opts, std::span(&seed, 1)).front());
}

Image negative_realization(const GeneratorModel& g, const InversionResult& result) {
  LatentCode negative = result.code;
  std::fill(negative.z2.begin(), negative.z2.end(), 0.0f);
  negative.intended_label = 0;
  return generate(g, negative);
}

double ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw Error(ErrorCode::kShape, "ssim needs images of equal shape");
  const auto window = gaussian_window();
  const int n = static_cast<int>(window.size());
  if (a.height() < n || a.width() < n) {
    throw Error(ErrorCode::kShape, "ssim needs images of at least 11x11");
  }
  const int h = a.height(), w = a.width();
  const std::size_t size = a.size();
  std::vector<double> va(size), vb(size), aa(size), bb(size), ab(size);
  for (std::size_t i = 0; i < size; ++i) {
    va[i] = a[i];
    vb[i] = b[i];
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = filter_valid(va, h, w, window);
  const auto mu_b = filter_valid(vb, h, w, window);
  const auto e_aa = filter_valid(aa, h, w, window);
  const auto e_bb = filter_valid(bb, h, w, window);
  const auto e_ab = filter_valid(ab, h, w, window);

  constexpr double kRange = 1.0;
  constexpr double c1 = (0.01 * kRange) * (0.01 * kRange);
  constexpr double c2 = (0.03 * kRange) * (0.03 * kRange);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
    const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShape, "cosine needs equal lengths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorCode::kUndefined, "cosine similarity of a zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  m.n = values.size();
  if (m.n == 0) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(m.n);
  if (m.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(m.n - 1));
  }
  return m;
}

nlohmann::json ConvergenceReport::to_json() const {
  auto ms = [](const MeanStd& m) {
    return nlohmann::json{{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
  };
  nlohmann::json per_image = nlohmann::json::array();
  for (const auto& im : images) {
    per_image.push_back({{"image", im.image_id},
                         {"failed", im.failed},
                         {"failure", im.failure},
                         {"cosine", im.cosine},
                         {"cosine_z1", im.cosine_z1},
                         {"cosine_z2", im.cosine_z2},
                         {"ssim", im.ssim}});
  }
  return {{"images", per_image},
          {"cosine", ms(cosine)},
          {"cosine_z1", ms(cosine_z1)},
          {"cosine_z2", ms(cosine_z2)},
          {"ssim", ms(ssim)}};
}

ConvergenceReport convergence_study(const GeneratorModel& g, const ClassifierModel& c,
                                    std::span<const Image> images,
                                    std::span<const std::string> image_ids, int restarts,
                                    const InversionOptions& opts, std::uint64_t base_seed) {
  if (restarts < 2) throw Error(ErrorCode::kPrecondition, "convergence study needs restarts >= 2");
  if (images.size() != image_ids.size()) {
    throw Error(ErrorCode::kPrecondition, "one id per image required");
  }
  ConvergenceReport report;
  std::vector<double> all_cos, all_cos1, all_cos2, all_ssim;
  for (std::size_t k = 0; k < images.size(); ++k) {
    ImageConvergence ic;
    ic.image_id = image_ids[k];
    try {
      std::vector<Image> copies(static_cast<std::size_t>(restarts), images[k]);
      std::vector<std::uint64_t> seeds;
      for (int r = 0; r < restarts; ++r) {
        seeds.push_back(derive_seed(base_seed, k * 1000 + static_cast<std::uint64_t>(r)));
      }
      const auto runs = invert_batch(g, c, copies, opts, seeds);
      for (int i = 0; i < restarts; ++i) {
        for (int j = i + 1; j < restarts; ++j) {
          std::vector<float> ci = runs[i].code.z1, cj = runs[j].code.z1;
          ci.insert(ci.end(), runs[i].code.z2.begin(), runs[i].code.z2.end());
          cj.insert(cj.end(), runs[j].code.z2.begin(), runs[j].code.z2.end());
          ic.cosine.push_back(cosine_similarity(ci, cj));
          ic.cosine_z1.push_back(cosine_similarity(runs[i].code.z1, runs[j].code.z1));
          ic.cosine_z2.push_back(cosine_similarity(runs[i].code.z2, runs[j].code.z2));
          ic.ssim.push_back(ssim(runs[i].recon, runs[j].recon));
        }
      }
    } catch (const Error& e) {
      ic.failed = true;
      ic.failure = e.what();
      ic.cosine.clear();
      ic.cosine_z1.clear();
      ic.cosine_z2.clear();
      ic.ssim.clear();
    }
    all_cos.insert(all_cos.end(), ic.cosine.begin(), ic.cosine.end());
    all_cos1.insert(all_cos1.end(), ic.cosine_z1.begin(), ic.cosine_z1.end());
    all_cos2.insert(all_cos2.end(), ic.cosine_z2.begin(), ic.cosine_z2.end());
    all_ssim.insert(all_ssim.end(), ic.ssim.begin(), ic.ssim.end());
    report.images.push_back(std::move(ic));
  }
  report.cosine = mean_std(all_cos);
  report.cosine_z1 = mean_std(all_cos1);
  report.cosine_z2 = mean_std(all_cos2);
  report.ssim = mean_std(all_ssim);
  return report;
}

}  // namespace medxgan

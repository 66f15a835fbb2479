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

#include "medxgan/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "medxgan/error.hpp"
#include "medxgan/rng.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {

namespace {

std::string aggregate_key(const std::string& group, const std::string& metric) {
  return group.empty() ? metric : group + "/" + metric;
}

bool close(double a, double b) {
  return std::fabs(a - b) <= 1e-9 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

double max_abs(const Image& map) {
  double m = 0.0;
  for (float v : map.values()) m = std::max(m, static_cast<double>(std::fabs(v)));
  return m;
}

std::size_t count_above(const Image& map, double relative_tol) {
  const double cut = relative_tol * max_abs(map);
  std::size_t n = 0;
  for (float v : map.values()) n += std::fabs(v) > cut ? 1 : 0;
  return n;
}

}  // namespace

std::map<std::string, MeanStd> compute_aggregates(const std::vector<EvalRecord>& records) {
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : records) {
    if (r.failed) continue;
    for (const auto& [name, v] : r.metrics) values[aggregate_key(r.group, name)].push_back(v);
  }
  std::map<std::string, MeanStd> out;
  for (const auto& [key, v] : values) out[key] = mean_std(v);
  return out;
}

void EvalReport::recompute_aggregates() { aggregates = compute_aggregates(records); }

const MeanStd& EvalReport::aggregate(const std::string& group, const std::string& metric) const {
  const auto it = aggregates.find(aggregate_key(group, metric));
  if (it == aggregates.end()) {
    throw Error(ErrorCode::kPrecondition, "no aggregate " + aggregate_key(group, metric));
  }
  return it->second;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j = {{"id", r.id}, {"group", r.group}, {"failed", r.failed},
                        {"metrics", r.metrics}};
    if (r.failed) j["failure"] = r.failure;
    recs.push_back(std::move(j));
  }
  nlohmann::json aggs = nlohmann::json::object();
  for (const auto& [key, m] : aggregates) {
    aggs[key] = {{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
  }
  return {{"version", "1"},         {"protocol", protocol}, {"config_hash", config_hash},
          {"seeds", seeds},         {"checkpoints", checkpoints}, {"summary", summary},
          {"aggregates", aggs},     {"records", recs}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.protocol = j.at("protocol").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seeds = j.at("seeds");
    r.checkpoints = j.at("checkpoints");
    r.summary = j.at("summary");
    for (const auto& rec : j.at("records")) {
      EvalRecord e;
      e.id = rec.at("id").get<std::string>();
      e.group = rec.at("group").get<std::string>();
      e.failed = rec.at("failed").get<bool>();
      if (e.failed) e.failure = rec.value("failure", "");
      e.metrics = rec.at("metrics").get<std::map<std::string, double>>();
      r.records.push_back(std::move(e));
    }
    for (const auto& [key, m] : j.at("aggregates").items()) {
      r.aggregates[key] = {m.at("mean").get<double>(), m.at("std").get<double>(),
                           m.at("n").get<std::size_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed eval report: ") + e.what());
  }
  const auto expected = compute_aggregates(r.records);
  bool consistent = expected.size() == r.aggregates.size();
  for (const auto& [key, m] : expected) {
    const auto it = r.aggregates.find(key);
    consistent = consistent && it != r.aggregates.end() && it->second.n == m.n &&
                 close(it->second.mean, m.mean) && close(it->second.std, m.std);
  }
  if (!consistent) {
    throw Error(ErrorCode::kConfig, "eval report aggregates disagree with its records",
                {{"protocol", r.protocol}});
  }
  return r;
}

std::string EvalReport::markdown() const {
  std::ostringstream out;
  out.precision(4);
  out << "## " << protocol << "\n\n";
  if (!summary.empty()) {
    for (const auto& [key, v] : summary.items()) out << "- " << key << ": " << v.dump() << "\n";
    out << "\n";
  }
  out << "| metric | mean | std | n |\n|---|---|---|---|\n";
  for (const auto& [key, m] : aggregates) {
    out << "| " << key << " | " << std::fixed << m.mean << " | " << m.std << " | " << m.n
        << " |\n";
  }
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed ? 1 : 0;
  if (failed > 0) out << "\n" << failed << " failed record(s)\n";
  return out.str();
}

EvalReport class_agreement(const GeneratorModel& g, const ClassifierModel& c, int n_structures,
                           std::uint64_t seed, int positives_per_structure) {
  if (n_structures < 1 || positives_per_structure < 1) {
    throw Error(ErrorCode::kPrecondition, "agreement needs at least one structure and positive");
  }
  Rng rng(seed);
  std::vector<LatentCode> codes;
  std::vector<std::string> ids;
  for (int s = 0; s < n_structures; ++s) {
    LatentCode neg = sample_latent(1, LabelPolicy::kAllNegative, g.arch.d1, g.arch.d2, rng)[0];
    codes.push_back(neg);
    ids.push_back("s" + std::to_string(s) + "/neg");
    for (int k = 0; k < positives_per_structure; ++k) {
      LatentCode pos = neg;
      pos.intended_label = 1;
      for (auto& v : pos.z2) v = static_cast<float>(rng.normal());
      codes.push_back(std::move(pos));
      ids.push_back("s" + std::to_string(s) + "/pos" + std::to_string(k));
    }
  }

  EvalReport report;
  report.protocol = "agreement";
  report.seeds["agreement"] = seed;
  std::vector<double> scores;
  std::vector<int> labels;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < codes.size(); start += kChunk) {
    const std::size_t end = std::min(codes.size(), start + kChunk);
    const auto images =
        generate(g, std::span<const LatentCode>(codes.data() + start, end - start));
    const auto p = positive_scores(c, to_batch(images));
    scores.insert(scores.end(), p.begin(), p.end());
  }
  double hits[2] = {0, 0}, totals[2] = {0, 0};
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const int label = codes[i].intended_label;
    const int predicted = scores[i] > 0.5 ? 1 : 0;
    labels.push_back(label);
    hits[label] += predicted == label ? 1 : 0;
    totals[label] += 1;
    report.records.push_back({ids[i],
                              "",
                              false,
                              "",
                              {{"correct", predicted == label ? 1.0 : 0.0},
                               {"intended_label", static_cast<double>(label)},
                               {"p_positive", scores[i]}}});
  }
  report.recompute_aggregates();
  report.summary["n_images"] = codes.size();
  report.summary["accuracy"] = report.aggregate("", "correct").mean;
  report.summary["balanced_accuracy"] = 0.5 * (hits[0] / totals[0] + hits[1] / totals[1]);
  report.summary["auc"] = roc_auc(scores, labels);
  return report;
}

void PerturbationSpec::validate() const {
  if (rule == SelectionRule::kTopPercent && !(value > 0.0 && value <= 100.0)) {
    throw Error(ErrorCode::kConfig, "top-percent q must lie in (0, 100]");
  }
  if (rule == SelectionRule::kThreshold && !(value >= 0.0 && std::isfinite(value))) {
    throw Error(ErrorCode::kConfig, "threshold must be finite and nonnegative");
  }
}

void to_json(nlohmann::json& j, const PerturbationSpec& s) {
  j = {{"rule", s.rule == SelectionRule::kTopPercent ? "top_percent" : "threshold"},
       {"value", s.value}};
}

void from_json(const nlohmann::json& j, PerturbationSpec& s) {
  if (auto it = j.find("rule"); it != j.end()) {
    const auto rule = it->get<std::string>();
    if (rule == "top_percent") {
      s.rule = SelectionRule::kTopPercent;
    } else if (rule == "threshold") {
      s.rule = SelectionRule::kThreshold;
    } else {
      throw Error(ErrorCode::kConfig, "unknown selection rule: " + rule);
    }
  }
  if (auto it = j.find("value"); it != j.end()) it->get_to(s.value);
  s.validate();
}

std::vector<std::size_t> top_percent_indices(const Image& map, double q) {
  if (!(q > 0.0 && q <= 100.0)) throw Error(ErrorCode::kPrecondition, "q must lie in (0, 100]");
  if (max_abs(map) == 0.0) return {};
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(map.size()) / 100.0));
  std::vector<std::size_t> order(map.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(map[a]) > std::fabs(map[b]);
  });
  order.resize(std::min(k, order.size()));
  return order;
}

Mask select_pixels(const Image& map, const PerturbationSpec& spec) {
  spec.validate();
  Mask selected(map.height(), map.width(), 0);
  if (spec.rule == SelectionRule::kTopPercent) {
    for (std::size_t i : top_percent_indices(map, spec.value)) selected[i] = 1;
  } else {
    for (std::size_t i = 0; i < map.size(); ++i) {
      selected[i] = std::fabs(map[i]) > spec.value ? 1 : 0;
    }
  }
  return selected;
}

PerturbationResult perturb(const Image& image, const Image& map, const PerturbationSpec& spec,
                           std::optional<float> fill) {
  if (!image.same_shape(map)) throw Error(ErrorCode::kShape, "map must match the image shape");
  PerturbationResult r;
  r.selected = select_pixels(map, spec);
  r.fill = fill.value_or(static_cast<float>(
      std::accumulate(image.values().begin(), image.values().end(), 0.0) /
      static_cast<double>(image.size())));
  r.image = image;
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (r.selected[i]) {
      r.image[i] = r.fill;
      ++r.count;
    }
  }
  r.empty_selection = r.count == 0;
  return r;
}

EvalReport counterfactual_drop(const ClassifierModel& c, const std::vector<NamedImage>& images,
                               const std::map<std::string, std::vector<Image>>& maps_by_method,
                               const PerturbationSpec& spec) {
  spec.validate();
  EvalReport report;
  report.protocol = "counterfactual";
  nlohmann::json spec_json = spec;
  report.summary["perturbation"] = spec_json;
  for (const auto& [method, maps] : maps_by_method) {
    if (maps.size() != images.size()) {
      throw Error(ErrorCode::kPrecondition, "one map per image and method required",
                  {{"method", method}});
    }
    for (std::size_t i = 0; i < images.size(); ++i) {
      EvalRecord rec{images[i].id, method, false, "", {}};
      try {
        const auto& x = images[i].image;
        const double before = predict(c, x).softmax[kPositiveClass];
        const auto p = perturb(x, maps[i], spec);
        const double after = p.empty_selection ? before : predict(c, p.image).softmax[kPositiveClass];
        rec.metrics = {{"drop", before - after},
                       {"p_before", before},
                       {"p_after", after},
                       {"selected", static_cast<double>(p.count)},
                       {"empty_selection", p.empty_selection ? 1.0 : 0.0}};
      } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
        rec.metrics.clear();
      }
      report.records.push_back(std::move(rec));
    }
  }
  report.recompute_aggregates();
  return report;
}

LocalizationCounts localization_ratio(const Image& lig, const Image& ig, double relative_tol) {
  if (!lig.same_shape(ig)) throw Error(ErrorCode::kShape, "maps must share a shape");
  LocalizationCounts out;
  out.lig = count_above(lig, relative_tol);
  out.ig = count_above(ig, relative_tol);
  if (out.ig == 0) {
    throw Error(ErrorCode::kUndefined, "IG map has no nonzero pixels; ratio undefined");
  }
  out.ratio = static_cast<double>(out.lig) / static_cast<double>(out.ig);
  return out;
}

double mask_overlap(const Image& map, const Mask& mask, double q) {
  if (!map.same_shape(mask)) throw Error(ErrorCode::kShape, "mask must match the map shape");
  const auto top = top_percent_indices(map, q);
  if (top.empty()) {
    throw Error(ErrorCode::kUndefined, "no pixels selected for mask overlap");
  }
  std::size_t inside = 0;
  for (std::size_t i : top) inside += mask[i] ? 1 : 0;
  return static_cast<double>(inside) / static_cast<double>(top.size());
}

}  // namespace medxgan

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

#include "medxgan/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "medxgan/attribution.hpp"
#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/render.hpp"
#include "medxgan/rng.hpp"
#include "medxgan/tensor_utils.hpp"

namespace medxgan {

namespace {

constexpr const char* kManifestName = "run_manifest.json";

// Rejects keys of `input` that the resolved form does not know about.
void check_keys(const json& input, const json& resolved, const std::string& path) {
  if (!input.is_object()) {
    throw Error(ErrorCode::kConfig, "expected an object", {{"key", path}});
  }
  for (const auto& [key, value] : input.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!resolved.contains(key)) throw Error(ErrorCode::kConfig, "unknown config key: " + full);
    if (value.is_object() && resolved.at(key).is_object()) {
      check_keys(value, resolved.at(key), full);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void prepare_out_dir(const fs::path& out, bool overwrite) {
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!overwrite) {
      throw Error(ErrorCode::kIo, "output directory is not empty; pass --overwrite",
                  {{"path", out.string()}});
    }
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  bool overwrite = false;
  std::string dataset;
  std::string classifier;
  std::string gan;
  std::string inversions;
  std::string explain;
  std::string protocol;
  std::string methods;
  std::string images;
};

// Shared state of one command invocation.
class Run {
 public:
  Run(std::string command, const Options& opts) : command_(std::move(command)) {
    started_ = timestamp_utc();
    json raw = json::object();
    if (!opts.config_path.empty()) raw = read_json(opts.config_path);
    cfg_ = RunConfig::from_json(raw);
    if (opts.seed) cfg_.seed = *opts.seed;
    cfg_.validate();
    if (opts.deterministic) enable_deterministic_mode();
    out_ = opts.out.empty() ? fs::path(cfg_.output_root) / command_ : fs::path(opts.out);
    prepare_out_dir(out_, opts.overwrite);
    write_json(out_ / "config.resolved.json", cfg_.to_json());
  }

  const RunConfig& cfg() const { return cfg_; }
  const fs::path& out() const { return out_; }

  // Verifies a producer directory and records it as an input.
  json use_input(const std::string& name, const std::string& dir, const std::string& producer) {
    if (dir.empty()) {
      throw Error(ErrorCode::kConfig, "missing required input --" + name);
    }
    json manifest = verify_artifact(dir, producer);
    inputs_[name] = {{"path", fs::absolute(dir).lexically_normal().string()},
                     {"command", manifest.at("command")},
                     {"content_hash", manifest.at("content_hash")}};
    return manifest;
  }

  std::string input_hash(const std::string& name) const {
    return inputs_.at(name).at("content_hash").get<std::string>();
  }

  json checkpoints() const {
    json j = json::object();
    for (const auto& [name, v] : inputs_.items()) j[name] = v.at("content_hash");
    return j;
  }

  // Lists every file with its hash and writes the manifest last.
  json finish(const json& summary) {
    json files = json::array();
    for (const auto& rel : list_files(out_)) {
      files.push_back({{"path", rel},
                       {"sha256", sha256_file(out_ / rel)},
                       {"bytes", fs::file_size(out_ / rel)}});
    }
    json manifest = {{"version", "1"},
                     {"command", command_},
                     {"config_hash", cfg_.hash()},
                     {"code_version", kCodeVersion},
                     {"seed", cfg_.seed},
                     {"inputs", inputs_},
                     {"started_at", started_},
                     {"finished_at", timestamp_utc()},
                     {"files", files},
                     {"summary", summary}};
    manifest["content_hash"] = manifest_content_hash(manifest);
    write_text_atomic(out_ / kManifestName, manifest.dump(2) + "\n");
    return manifest;
  }

 private:
  std::string command_;
  std::string started_;
  RunConfig cfg_;
  fs::path out_;
  json inputs_ = json::object();
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string sample_id(const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%05zu", split.c_str(), index);
  return buf;
}

std::vector<std::string> read_index(const fs::path& dir) {
  return read_json(dir / "index.json").at("ids").get<std::vector<std::string>>();
}

void print_summary(const std::string& command, const json& manifest) {
  std::cout << json{{"command", command},
                    {"content_hash", manifest.at("content_hash")},
                    {"summary", manifest.at("summary")}}
                   .dump()
            << std::endl;
}

// ---- commands ----

int cmd_phantom(const Options& opts) {
  Run run("phantom", opts);
  const auto& cfg = run.cfg();
  const auto train = build_dataset(cfg.phantom.params, cfg.phantom.n_per_class,
                                   derive_seed(cfg.seed, "phantom/train"), run.out() / "train");
  const auto val = build_dataset(cfg.phantom.params, cfg.phantom.val_per_class,
                                 derive_seed(cfg.seed, "phantom/val"), run.out() / "val");
  const json summary = {{"train_hash", train.content_hash()},
                        {"val_hash", val.content_hash()},
                        {"train_count", train.samples.size()},
                        {"val_count", val.samples.size()}};
  print_summary("phantom", run.finish(summary));
  return 0;
}

int cmd_train_classifier(const Options& opts) {
  Run run("train-classifier", opts);
  const auto& cfg = run.cfg();
  run.use_input("dataset", opts.dataset, "phantom");
  const Dataset train = load_dataset(fs::path(opts.dataset) / "train");
  const Dataset val = load_dataset(fs::path(opts.dataset) / "val");
  auto trained = train_classifier(train, val, cfg.classifier.arch, cfg.classifier.training,
                                  derive_seed(cfg.seed, "classifier"));
  trained.model.freeze();
  trained.model.metadata()["dataset_hash"] = train.manifest.content_hash();
  trained.model.save(run.out() / "classifier");
  const json metrics = {{"val_accuracy", trained.metrics.val_accuracy},
                        {"val_auc", trained.metrics.val_auc},
                        {"epoch_loss", trained.metrics.epoch_loss},
                        {"checksum", trained.model.checksum()}};
  write_json(run.out() / "metrics.json", metrics);
  print_summary("train-classifier", run.finish(metrics));
  return 0;
}

ClassifierModel load_classifier(Run& run, const Options& opts) {
  run.use_input("classifier", opts.classifier, "train-classifier");
  return ClassifierModel::load(fs::path(opts.classifier) / "classifier");
}

GeneratorModel load_generator(Run& run, const Options& opts) {
  run.use_input("gan", opts.gan, "train-gan");
  return GeneratorModel::load(fs::path(opts.gan) / "generator");
}

int cmd_train_gan(const Options& opts) {
  Run run("train-gan", opts);
  const auto& cfg = run.cfg();
  run.use_input("dataset", opts.dataset, "phantom");
  const ClassifierModel classifier = load_classifier(run, opts);
  const Dataset train = load_dataset(fs::path(opts.dataset) / "train");

  GanTrainConfig gan = cfg.gan;
  gan.seed = derive_seed(cfg.seed, "gan");
  gan.generator.image_size = cfg.phantom.params.image_size;
  const fs::path out = run.out();
  auto on_checkpoint = [&](int epoch, const GeneratorModel& g, const DiscriminatorModel& d) {
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d", epoch);
    g.save(out / "checkpoints" / name / "generator");
    d.save(out / "checkpoints" / name / "discriminator");
  };
  auto result = train_medxgan(gan, train, classifier, on_checkpoint);
  result.generator.metadata["classifier_hash"] = run.input_hash("classifier");
  result.generator.save(out / "generator");
  result.discriminator.save(out / "discriminator");
  write_text(out / "training_log.csv", training_log_csv(result.log));
  const json summary = {
      {"steps_per_epoch", result.steps_per_epoch},
      {"steps", result.log.size()},
      {"halted", result.halted},
      {"halt_report", result.halt_report},
      {"generator_checksum", result.generator.checksum()},
      {"classifier_checksum_before", result.classifier_checksum_before},
      {"classifier_checksum_after", result.classifier_checksum_after},
      {"classifier_unchanged",
       result.classifier_checksum_before == result.classifier_checksum_after}};
  write_json(out / "summary.json", summary);
  const json manifest = run.finish(summary);
  print_summary("train-gan", manifest);
  if (result.halted) throw Error(ErrorCode::kDivergence, result.halt_report);
  return 0;
}

int cmd_invert(const Options& opts) {
  Run run("invert", opts);
  const auto& cfg = run.cfg();
  const GeneratorModel g = load_generator(run, opts);
  const ClassifierModel c = load_classifier(run, opts);
  run.use_input("dataset", opts.dataset, "phantom");
  const Dataset val = load_dataset(fs::path(opts.dataset) / "val");

  std::vector<std::size_t> picks;
  if (!opts.images.empty()) {
    for (const auto& id : split_list(opts.images)) {
      std::size_t k = 0;
      for (; k < val.size(); ++k) {
        if (sample_id("val", k) == id) break;
      }
      if (k == val.size()) throw Error(ErrorCode::kConfig, "unknown image id: " + id);
      if (val.samples[k].label != 1) {
        throw Error(ErrorCode::kPrecondition, "inversion expects a positive image: " + id);
      }
      picks.push_back(k);
    }
  } else {
    for (std::size_t k = 0; k < val.size() && static_cast<int>(picks.size()) < cfg.inversion.n_images; ++k) {
      if (val.samples[k].label == 1) picks.push_back(k);
    }
  }
  if (picks.empty()) throw Error(ErrorCode::kConfig, "no images selected for inversion");

  std::vector<Image> images;
  std::vector<std::uint64_t> seeds;
  const std::uint64_t base = derive_seed(cfg.seed, "invert");
  for (std::size_t k : picks) {
    images.push_back(val.samples[k].pixels);
    seeds.push_back(derive_seed(base, static_cast<std::uint64_t>(k)));
  }
  const auto results = invert_batch(g, c, images, cfg.inversion.options, seeds);

  std::vector<std::string> ids;
  std::size_t negatives_below_half = 0, reduced_tenfold = 0;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const std::string id = sample_id("val", picks[i]);
    const auto& r = results[i];
    const fs::path dir = run.out() / id;
    fs::create_directories(dir);
    json rj = r.to_json();
    rj["image_id"] = id;
    rj["source_file"] = val.manifest.samples[picks[i]].file;
    rj["dataset_hash"] = val.manifest.content_hash();
    rj["initial_total"] = r.initial_total(cfg.inversion.options);
    rj["final_total"] = r.final_total(cfg.inversion.options);
    const Image negative = negative_realization(g, r);
    const double p_neg = predict(c, negative).softmax[kPositiveClass];
    rj["negative_p_positive"] = p_neg;
    rj["recon_p_positive"] = predict(c, r.recon).softmax[kPositiveClass];
    write_json(dir / "result.json", rj);
    write_text(dir / "trace.csv", r.trace_csv());
    write_png(dir / "input.png", images[i]);
    write_png(dir / "recon.png", r.recon);
    write_png(dir / "negative.png", negative);
    if (val.samples[picks[i]].mask) write_png(dir / "mask.png", *val.samples[picks[i]].mask);
    negatives_below_half += p_neg < 0.5 ? 1 : 0;
    reduced_tenfold += rj["final_total"].get<double>() < 0.1 * rj["initial_total"].get<double>();
    ids.push_back(id);
  }
  write_json(run.out() / "index.json", {{"version", "1"}, {"ids", ids}});
  const double n = static_cast<double>(ids.size());
  const json summary = {{"images", ids.size()},
                        {"negative_below_half_fraction", negatives_below_half / n},
                        {"loss_reduced_tenfold_fraction", reduced_tenfold / n}};
  print_summary("invert", run.finish(summary));
  return 0;
}

int cmd_explain(const Options& opts) {
  Run run("explain", opts);
  const auto& cfg = run.cfg();
  const GeneratorModel g = load_generator(run, opts);
  const ClassifierModel c = load_classifier(run, opts);
  run.use_input("inversions", opts.inversions, "invert");
  std::vector<std::string> method_names =
      opts.methods.empty() ? cfg.attribution.methods : split_list(opts.methods);
  std::vector<AttributionMethod> methods;
  for (const auto& m : method_names) methods.push_back(parse_method(m));
  const std::string layer = cfg.attribution.capture_layer.empty()
                                ? c.arch().default_capture_layer()
                                : cfg.attribution.capture_layer;

  const auto ids = read_index(opts.inversions);
  double monotone_sum = 0.0;
  bool endpoints_exact = true;
  for (const auto& id : ids) {
    const fs::path src = fs::path(opts.inversions) / id;
    const auto result = InversionResult::from_json(read_json(src / "result.json"));
    const Image x = read_png_image(src / "input.png");
    const json sources = {{"image", id},
                          {"gan", run.input_hash("gan")},
                          {"classifier", run.input_hash("classifier")},
                          {"inversions", run.input_hash("inversions")}};
    const fs::path dir = run.out() / id;
    for (auto method : methods) {
      AttributionMap map;
      switch (method) {
        case AttributionMethod::kDiff:
          map = difference_map(generate(g, result.code), negative_realization(g, result));
          break;
        case AttributionMethod::kGradCam:
          map = gradcam(c, x, kPositiveClass, layer);
          break;
        case AttributionMethod::kIg:
          map = integrated_gradients(c, x, std::nullopt, cfg.attribution.steps);
          break;
        case AttributionMethod::kLig:
          map = latent_integrated_gradients(g, c, result.code, cfg.attribution.steps);
          break;
      }
      map.sources.update(sources);
      save_map(map, dir, to_string(method), &x);
    }
    const auto sweep =
        interpolation_sweep(g, c, result.code, {cfg.attribution.interpolation_steps, {}});
    write_png(dir / "filmstrip.png", render_film_strip(sweep));
    const bool neg_exact = sweep.frames.front() == negative_realization(g, result);
    const bool pos_exact = sweep.frames.back() == generate(g, result.code);
    std::vector<double> p_pos;
    for (const auto& o : sweep.outputs) p_pos.push_back(o.softmax[kPositiveClass]);
    write_json(dir / "sweep.json", {{"version", "1"},
                                    {"alphas", sweep.alphas},
                                    {"p_positive", p_pos},
                                    {"monotonicity_fraction", sweep.monotonicity_fraction},
                                    {"endpoint_negative_exact", neg_exact},
                                    {"endpoint_positive_exact", pos_exact}});
    monotone_sum += sweep.monotonicity_fraction;
    endpoints_exact = endpoints_exact && neg_exact && pos_exact;
  }
  write_json(run.out() / "index.json",
             {{"version", "1"}, {"ids", ids}, {"methods", method_names}, {"capture_layer", layer}});
  const json summary = {{"images", ids.size()},
                        {"methods", method_names},
                        {"mean_monotonicity", monotone_sum / std::max<std::size_t>(1, ids.size())},
                        {"endpoints_exact", endpoints_exact}};
  print_summary("explain", run.finish(summary));
  return 0;
}

EvalReport protocol_counterfactual(Run& run, const Options& opts) {
  const ClassifierModel c = load_classifier(run, opts);
  run.use_input("inversions", opts.inversions, "invert");
  run.use_input("explain", opts.explain, "explain");
  const json index = read_json(fs::path(opts.explain) / "index.json");
  const auto ids = index.at("ids").get<std::vector<std::string>>();
  std::vector<NamedImage> images;
  std::map<std::string, std::vector<Image>> maps;
  for (const auto& id : ids) {
    images.push_back({id, read_png_image(fs::path(opts.inversions) / id / "input.png")});
    for (const auto& m : index.at("methods").get<std::vector<std::string>>()) {
      maps[m].push_back(load_map(fs::path(opts.explain) / id, m).values);
    }
  }
  return counterfactual_drop(c, images, maps, run.cfg().eval.perturbation);
}

EvalReport protocol_localization(Run& run, const Options& opts) {
  run.use_input("explain", opts.explain, "explain");
  EvalReport report;
  report.protocol = "localization";
  for (const auto& id : read_index(opts.explain)) {
    EvalRecord rec{id, "", false, "", {}};
    try {
      const fs::path dir = fs::path(opts.explain) / id;
      const auto counts = localization_ratio(load_map(dir, "lig").values,
                                             load_map(dir, "ig").values,
                                             run.cfg().eval.relative_tol);
      rec.metrics = {{"ratio", counts.ratio},
                     {"lig_nonzero", static_cast<double>(counts.lig)},
                     {"ig_nonzero", static_cast<double>(counts.ig)}};
    } catch (const Error& e) {
      rec.failed = true;
      rec.failure = e.what();
    }
    report.records.push_back(std::move(rec));
  }
  report.recompute_aggregates();
  report.summary["relative_tol"] = run.cfg().eval.relative_tol;
  return report;
}

EvalReport protocol_overlap(Run& run, const Options& opts) {
  run.use_input("inversions", opts.inversions, "invert");
  run.use_input("explain", opts.explain, "explain");
  const json index = read_json(fs::path(opts.explain) / "index.json");
  const double q = run.cfg().eval.overlap_q;
  EvalReport report;
  report.protocol = "overlap";
  for (const auto& id : index.at("ids").get<std::vector<std::string>>()) {
    const fs::path mask_path = fs::path(opts.inversions) / id / "mask.png";
    for (const auto& m : index.at("methods").get<std::vector<std::string>>()) {
      EvalRecord rec{id, m, false, "", {}};
      try {
        if (!fs::exists(mask_path)) {
          throw Error(ErrorCode::kMissingArtifact, "no ground-truth mask for " + id);
        }
        const Mask mask = read_png_mask(mask_path);
        rec.metrics = {{"precision", mask_overlap(load_map(fs::path(opts.explain) / id, m).values,
                                                  mask, q)}};
      } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
      }
      report.records.push_back(std::move(rec));
    }
  }
  report.recompute_aggregates();
  report.summary["q"] = q;
  return report;
}

EvalReport protocol_convergence(Run& run, const Options& opts) {
  const auto& cfg = run.cfg();
  const GeneratorModel g = load_generator(run, opts);
  const ClassifierModel c = load_classifier(run, opts);
  run.use_input("dataset", opts.dataset, "phantom");
  const Dataset val = load_dataset(fs::path(opts.dataset) / "val");
  std::vector<Image> images;
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < val.size() && static_cast<int>(ids.size()) < cfg.eval.convergence_images; ++k) {
    if (val.samples[k].label != 1) continue;
    images.push_back(val.samples[k].pixels);
    ids.push_back(sample_id("val", k));
  }
  const std::uint64_t seed = derive_seed(cfg.seed, "convergence");
  const auto study =
      convergence_study(g, c, images, ids, cfg.eval.restarts, cfg.inversion.options, seed);
  EvalReport report;
  report.protocol = "convergence";
  report.seeds["convergence"] = seed;
  for (const auto& im : study.images) {
    if (im.failed) {
      report.records.push_back({im.image_id, "", true, im.failure, {}});
      continue;
    }
    for (std::size_t p = 0; p < im.cosine.size(); ++p) {
      report.records.push_back({im.image_id + "/pair" + std::to_string(p),
                                "",
                                false,
                                "",
                                {{"cosine", im.cosine[p]},
                                 {"cosine_z1", im.cosine_z1[p]},
                                 {"cosine_z2", im.cosine_z2[p]},
                                 {"ssim", im.ssim[p]}}});
    }
  }
  report.recompute_aggregates();
  report.summary["restarts"] = cfg.eval.restarts;
  report.summary["images"] = ids.size();
  return report;
}

EvalReport protocol_interpolation(Run& run, const Options& opts) {
  run.use_input("explain", opts.explain, "explain");
  EvalReport report;
  report.protocol = "interpolation";
  std::vector<double> fractions;
  bool exact = true;
  for (const auto& id : read_index(opts.explain)) {
    const json sweep = read_json(fs::path(opts.explain) / id / "sweep.json");
    const double f = sweep.at("monotonicity_fraction").get<double>();
    const bool neg = sweep.at("endpoint_negative_exact").get<bool>();
    const bool pos = sweep.at("endpoint_positive_exact").get<bool>();
    report.records.push_back({id,
                              "",
                              false,
                              "",
                              {{"monotonicity", f},
                               {"endpoint_negative_exact", neg ? 1.0 : 0.0},
                               {"endpoint_positive_exact", pos ? 1.0 : 0.0}}});
    fractions.push_back(f);
    exact = exact && neg && pos;
  }
  report.recompute_aggregates();
  std::sort(fractions.begin(), fractions.end());
  double median = 0.0;
  if (!fractions.empty()) {
    const std::size_t n = fractions.size();
    median = n % 2 ? fractions[n / 2] : 0.5 * (fractions[n / 2 - 1] + fractions[n / 2]);
  }
  report.summary["median_monotonicity"] = median;
  report.summary["endpoints_exact"] = exact;
  return report;
}

int cmd_evaluate(const Options& opts) {
  Run run("evaluate", opts);
  const auto& cfg = run.cfg();
  EvalReport report;
  if (opts.protocol == "agreement") {
    const GeneratorModel g = load_generator(run, opts);
    const ClassifierModel c = load_classifier(run, opts);
    report = class_agreement(g, c, cfg.eval.n_structures, derive_seed(cfg.seed, "agreement"),
                             cfg.eval.positives_per_structure);
  } else if (opts.protocol == "counterfactual") {
    report = protocol_counterfactual(run, opts);
  } else if (opts.protocol == "localization") {
    report = protocol_localization(run, opts);
  } else if (opts.protocol == "overlap") {
    report = protocol_overlap(run, opts);
  } else if (opts.protocol == "convergence") {
    report = protocol_convergence(run, opts);
  } else if (opts.protocol == "interpolation") {
    report = protocol_interpolation(run, opts);
  } else {
    throw Error(ErrorCode::kConfig, "unknown protocol: " + opts.protocol);
  }
  report.config_hash = cfg.hash();
  report.seeds["global"] = cfg.seed;
  report.checkpoints = run.checkpoints();
  write_json(run.out() / "report.json", report.to_json());
  write_text(run.out() / "report.md", report.markdown());
  json summary = report.summary;
  summary["protocol"] = report.protocol;
  nlohmann::json aggs = nlohmann::json::object();
  for (const auto& [key, m] : report.aggregates) aggs[key] = {{"mean", m.mean}, {"std", m.std}, {"n", m.n}};
  summary["aggregates"] = aggs;
  print_summary("evaluate", run.finish(summary));
  return 0;
}

void print_error(std::string_view code, const std::string& message,
                 const std::map<std::string, std::string>& context) {
  std::cerr << json{{"code", std::string(code)},
                    {"message", message},
                    {"context", context}}
                   .dump()
            << std::endl;
}

}  // namespace

json RunConfig::to_json() const {
  json phantom_j = phantom.params;
  phantom_j["n_per_class"] = phantom.n_per_class;
  phantom_j["val_per_class"] = phantom.val_per_class;
  json arch = classifier.arch;
  arch.erase("image_size");
  json inversion_j = inversion.options;
  inversion_j["n_images"] = inversion.n_images;
  return {{"version", "1"},
          {"seed", seed},
          {"output_root", output_root},
          {"phantom", phantom_j},
          {"classifier", {{"architecture", arch}, {"training", classifier.training}}},
          {"gan", gan},
          {"inversion", inversion_j},
          {"attribution",
           {{"steps", attribution.steps},
            {"interpolation_steps", attribution.interpolation_steps},
            {"capture_layer", attribution.capture_layer},
            {"methods", attribution.methods}}},
          {"eval",
           {{"n_structures", eval.n_structures},
            {"positives_per_structure", eval.positives_per_structure},
            {"perturbation", eval.perturbation},
            {"overlap_q", eval.overlap_q},
            {"restarts", eval.restarts},
            {"convergence_images", eval.convergence_images},
            {"relative_tol", eval.relative_tol}}}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  try {
    check_keys(j, c.to_json(), "");
    read_field(j, "seed", c.seed);
    read_field(j, "output_root", c.output_root);
    if (j.contains("phantom")) {
      json p = j.at("phantom");
      read_field(p, "n_per_class", c.phantom.n_per_class);
      read_field(p, "val_per_class", c.phantom.val_per_class);
      p.erase("n_per_class");
      p.erase("val_per_class");
      c.phantom.params = p.get<PhantomParams>();
    }
    if (j.contains("classifier")) {
      const json& s = j.at("classifier");
      if (s.contains("architecture")) c.classifier.arch = s.at("architecture").get<ClassifierArch>();
      if (s.contains("training")) {
        c.classifier.training = s.at("training").get<ClassifierHyperParams>();
      }
    }
    if (j.contains("gan")) c.gan = j.at("gan").get<GanTrainConfig>();
    if (j.contains("inversion")) {
      json s = j.at("inversion");
      read_field(s, "n_images", c.inversion.n_images);
      s.erase("n_images");
      c.inversion.options = s.get<InversionOptions>();
    }
    if (j.contains("attribution")) {
      const json& s = j.at("attribution");
      read_field(s, "steps", c.attribution.steps);
      read_field(s, "interpolation_steps", c.attribution.interpolation_steps);
      read_field(s, "capture_layer", c.attribution.capture_layer);
      read_field(s, "methods", c.attribution.methods);
    }
    if (j.contains("eval")) {
      const json& s = j.at("eval");
      read_field(s, "n_structures", c.eval.n_structures);
      read_field(s, "positives_per_structure", c.eval.positives_per_structure);
      if (s.contains("perturbation")) c.eval.perturbation = s.at("perturbation").get<PerturbationSpec>();
      read_field(s, "overlap_q", c.eval.overlap_q);
      read_field(s, "restarts", c.eval.restarts);
      read_field(s, "convergence_images", c.eval.convergence_images);
      read_field(s, "relative_tol", c.eval.relative_tol);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed config: ") + e.what());
  }
  const int size = c.phantom.params.image_size;
  if (j.contains("classifier") && j.at("classifier").contains("architecture") &&
      j.at("classifier").at("architecture").contains("image_size") &&
      c.classifier.arch.image_size != size) {
    throw Error(ErrorCode::kConfig, "classifier image_size must match phantom image_size");
  }
  c.classifier.arch.image_size = size;
  c.gan.generator.image_size = size;
  c.validate();
  return c;
}

std::string RunConfig::hash() const { return sha256_hex(canonical_dump(to_json())); }

void RunConfig::validate() const {
  phantom.params.validate();
  classifier.arch.validate();
  gan.validate();
  gan.generator.validate();
  eval.perturbation.validate();
  if (phantom.n_per_class < 1 || phantom.val_per_class < 1) {
    throw Error(ErrorCode::kConfig, "dataset sizes must be >= 1");
  }
  if (inversion.options.iterations < 1 || inversion.n_images < 1) {
    throw Error(ErrorCode::kConfig, "inversion needs iterations >= 1 and n_images >= 1");
  }
  if (attribution.steps < 1 || attribution.interpolation_steps < 1) {
    throw Error(ErrorCode::kConfig, "attribution steps must be >= 1");
  }
  for (const auto& m : attribution.methods) parse_method(m);
  if (!attribution.capture_layer.empty()) {
    const auto ids = classifier.arch.layer_ids();
    if (std::find(ids.begin(), ids.end(), attribution.capture_layer) == ids.end()) {
      throw Error(ErrorCode::kConfig, "unknown capture layer: " + attribution.capture_layer);
    }
  }
  if (eval.n_structures < 1 || eval.positives_per_structure < 1 || eval.restarts < 2 ||
      eval.convergence_images < 1 || !(eval.overlap_q > 0.0 && eval.overlap_q <= 100.0) ||
      !(eval.relative_tol >= 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid eval section");
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return 2;
    case ErrorCode::kMissingArtifact: return 3;
    case ErrorCode::kHashMismatch: return 4;
    case ErrorCode::kNumeric:
    case ErrorCode::kDivergence: return 5;
    case ErrorCode::kIo: return 6;
    default: return 1;
  }
}

std::vector<std::string> list_files(const fs::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel != kManifestName) out.push_back(rel);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string manifest_content_hash(const json& manifest) {
  json inputs = json::object();
  for (const auto& [name, v] : manifest.at("inputs").items()) inputs[name] = v.at("content_hash");
  const json stable = {{"command", manifest.at("command")},
                       {"config_hash", manifest.at("config_hash")},
                       {"code_version", manifest.at("code_version")},
                       {"inputs", inputs},
                       {"files", manifest.at("files")}};
  return sha256_hex(canonical_dump(stable));
}

json verify_artifact(const fs::path& dir, const std::string& expected_command) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kMissingArtifact, "artifact has no run manifest",
                {{"path", path.string()}});
  }
  const json manifest = read_json(path);
  if (!expected_command.empty() && manifest.value("command", "") != expected_command) {
    throw Error(ErrorCode::kConfig, "artifact was produced by a different command",
                {{"path", dir.string()}, {"expected", expected_command}});
  }
  for (const auto& f : manifest.at("files")) {
    const fs::path file = dir / f.at("path").get<std::string>();
    if (!fs::exists(file)) {
      throw Error(ErrorCode::kMissingArtifact, "artifact file is missing",
                  {{"path", file.string()}});
    }
    if (sha256_file(file) != f.at("sha256").get<std::string>()) {
      throw Error(ErrorCode::kHashMismatch, "artifact file does not match its manifest",
                  {{"path", file.string()}});
    }
  }
  if (manifest_content_hash(manifest) != manifest.value("content_hash", "")) {
    throw Error(ErrorCode::kHashMismatch, "run manifest content hash is stale",
                {{"path", path.string()}});
  }
  return manifest;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"medxgan: classifier-in-the-loop GAN explanations on synthetic phantoms"};
  app.require_subcommand(1);
  Options opts;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "Global seed (overrides the config)");
    sub->add_flag("--deterministic", opts.deterministic, "Bit-reproducible execution");
    sub->add_option("--out", opts.out, "Output directory");
    sub->add_flag("--overwrite", opts.overwrite, "Replace a non-empty output directory");
  };
  auto* phantom = app.add_subcommand("phantom", "Build the synthetic phantom dataset");
  auto* train_c = app.add_subcommand("train-classifier", "Train the frozen classifier");
  auto* train_g = app.add_subcommand("train-gan", "Train the generator against the classifier");
  auto* invert = app.add_subcommand("invert", "Recover latent codes of positive images");
  auto* explain = app.add_subcommand("explain", "Attribution maps and interpolation strips");
  auto* evaluate = app.add_subcommand("evaluate", "Run one evaluation protocol");
  for (auto* sub : {phantom, train_c, train_g, invert, explain, evaluate}) add_common(sub);
  for (auto* sub : {train_c, train_g, invert, evaluate}) {
    sub->add_option("--dataset", opts.dataset, "Output directory of `phantom`");
  }
  for (auto* sub : {train_g, invert, explain, evaluate}) {
    sub->add_option("--classifier", opts.classifier, "Output directory of `train-classifier`");
  }
  for (auto* sub : {invert, explain, evaluate}) {
    sub->add_option("--gan", opts.gan, "Output directory of `train-gan`");
  }
  for (auto* sub : {explain, evaluate}) {
    sub->add_option("--inversions", opts.inversions, "Output directory of `invert`");
  }
  evaluate->add_option("--explain", opts.explain, "Output directory of `explain`");
  evaluate
      ->add_option("--protocol", opts.protocol,
                   "agreement|counterfactual|localization|overlap|convergence|interpolation")
      ->required();
  explain->add_option("--methods", opts.methods, "Comma list of diff,gradcam,ig,lig");
  invert->add_option("--images", opts.images, "Comma list of ids such as val-00250");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error(to_string(ErrorCode::kConfig), e.what(), {});
    return exit_code_for(ErrorCode::kConfig);
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) opts.seed = seed;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(opts);
    if (train_c->parsed()) return cmd_train_classifier(opts);
    if (train_g->parsed()) return cmd_train_gan(opts);
    if (invert->parsed()) return cmd_invert(opts);
    if (explain->parsed()) return cmd_explain(opts);
    return cmd_evaluate(opts);
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what(), e.context());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    print_error(to_string(ErrorCode::kIo), e.what(), {{"path", e.path1().string()}});
    return exit_code_for(ErrorCode::kIo);
  } catch (const std::exception& e) {
    print_error("internal", e.what(), {});
    return 1;
  }
}

}  // namespace medxgan

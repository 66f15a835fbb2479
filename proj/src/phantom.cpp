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

#include "medxgan/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "medxgan/error.hpp"
#include "medxgan/io.hpp"
#include "medxgan/rng.hpp"

namespace medxgan {

namespace {

constexpr int kPlacementAttempts = 500;

// sqrt(2 ln 2): half-maximum radius of a Gaussian in units of sigma.
const double kHalfMaxRadius = std::sqrt(2.0 * std::numbers::ln2);

struct Segment {
  double x0, y0, x1, y1;
};

struct Sinusoid {
  double kx, ky, phase, amplitude;
};

struct Anatomy {
  double cx, cy, a, b, cos_t, sin_t;
  double interior_rho;  // normalized radius where the rim begins
  std::vector<Sinusoid> texture;
  std::vector<Segment> ridges;
  std::vector<double> noise;

  double rho(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double u = dx * cos_t + dy * sin_t;
    const double v = -dx * sin_t + dy * cos_t;
    return std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
  }
};

double segment_distance(const Segment& s, double x, double y) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((x - s.x0) * vx + (y - s.y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double px = s.x0 + t * vx - x, py = s.y0 + t * vy - y;
  return std::sqrt(px * px + py * py);
}

Anatomy make_anatomy(std::uint64_t structure_seed, const PhantomParams& p) {
  Rng rng(structure_seed);
  const double size = p.image_size;
  Anatomy an{};
  an.cx = 0.5 * size * (1.0 + p.organ_center_jitter * rng.uniform(-1.0, 1.0));
  an.cy = 0.5 * size * (1.0 + p.organ_center_jitter * rng.uniform(-1.0, 1.0));
  an.a = size * rng.uniform(p.organ_axis_min, p.organ_axis_max);
  an.b = size * rng.uniform(p.organ_axis_min, p.organ_axis_max);
  const double theta = rng.uniform(-p.organ_max_rotation, p.organ_max_rotation);
  an.cos_t = std::cos(theta);
  an.sin_t = std::sin(theta);
  an.interior_rho = 1.0 - p.rim_width * size / std::min(an.a, an.b);

  for (int k = 0; k < 3; ++k) {
    an.texture.push_back({rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35),
                          rng.uniform(0.0, 2.0 * std::numbers::pi),
                          p.texture_amplitude / 3.0 * rng.uniform(0.5, 1.0)});
  }

  const int n_ridges = rng.uniform_int(p.ridge_min, p.ridge_max);
  for (int k = 0; k < n_ridges; ++k) {
    // Anchor inside 80% of the interior so segments run through the organ.
    const double r = 0.8 * an.interior_rho * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double u = r * an.a * std::cos(phi), v = r * an.b * std::sin(phi);
    const double x = an.cx + u * an.cos_t - v * an.sin_t;
    const double y = an.cy + u * an.sin_t + v * an.cos_t;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double half = rng.uniform(0.3, 0.7) * std::min(an.a, an.b);
    an.ridges.push_back({x - half * std::cos(angle), y - half * std::sin(angle),
                         x + half * std::cos(angle), y + half * std::sin(angle)});
  }

  an.noise.resize(static_cast<std::size_t>(p.image_size) * p.image_size);
  for (auto& n : an.noise) n = p.noise_level * rng.normal();
  return an;
}

Image render_anatomy(const Anatomy& an, const PhantomParams& p) {
  const int size = p.image_size;
  const double ridge_sigma = p.ridge_width * size;
  Image image(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double x = c + 0.5, y = r + 0.5;
      const double rho = an.rho(x, y);
      double v;
      if (rho >= 1.0) {
        v = p.background;
      } else {
        double texture = 0.0;
        for (const auto& s : an.texture) {
          texture += s.amplitude * std::sin(s.kx * x + s.ky * y + s.phase);
        }
        if (rho >= an.interior_rho) {
          v = p.rim_level + texture;
        } else {
          v = p.organ_level + texture;
          for (const auto& seg : an.ridges) {
            const double d = segment_distance(seg, x, y);
            v += p.ridge_amplitude * std::exp(-d * d / (2.0 * ridge_sigma * ridge_sigma));
          }
        }
      }
      v += an.noise[static_cast<std::size_t>(r) * size + c];
      image(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return image;
}

Mask region_mask(const Anatomy& an, const PhantomParams& p, double rho_limit) {
  const int size = p.image_size;
  Mask mask(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      mask(r, c) = an.rho(c + 0.5, r + 0.5) < rho_limit ? 1 : 0;
    }
  }
  return mask;
}

std::string zero_padded(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

}  // namespace

void PhantomParams::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
  if (image_size < 16) fail("phantom image_size must be at least 16");
  if (organ_axis_min <= 0 || organ_axis_max < organ_axis_min || organ_axis_max > 0.5)
    fail("organ axis range must satisfy 0 < min <= max <= 0.5");
  if (ridge_min < 0 || ridge_max < ridge_min) fail("invalid ridge count range");
  if (blob_min < 1 || blob_max < blob_min) fail("blob count range must satisfy 1 <= min <= max");
  if (blob_sigma_min <= 0 || blob_sigma_max < blob_sigma_min) fail("invalid blob sigma range");
  if (blob_delta <= 0 || blob_delta > 1) fail("blob_delta must lie in (0, 1]");
  if (noise_level < 0 || texture_amplitude < 0) fail("noise and texture must be non-negative");
  const double interior = organ_axis_min - rim_width;
  const double blob_radius = blob_sigma_max * kHalfMaxRadius;
  if (interior <= 0 || blob_radius > 0.8 * interior ||
      blob_radius * image_size + 1.0 > interior * image_size) {
    throw Error(ErrorCode::kConfig,
                "blob radius range cannot fit inside the minimum organ ellipse",
                {{"max_blob_radius", std::to_string(blob_radius)},
                 {"min_interior_semi_axis", std::to_string(interior)}});
  }
}

void to_json(nlohmann::json& j, const PhantomParams& p) {
  j = nlohmann::json{
      {"image_size", p.image_size},
      {"background", p.background},
      {"organ_level", p.organ_level},
      {"rim_level", p.rim_level},
      {"rim_width", p.rim_width},
      {"organ_axis_min", p.organ_axis_min},
      {"organ_axis_max", p.organ_axis_max},
      {"organ_center_jitter", p.organ_center_jitter},
      {"organ_max_rotation", p.organ_max_rotation},
      {"ridge_min", p.ridge_min},
      {"ridge_max", p.ridge_max},
      {"ridge_amplitude", p.ridge_amplitude},
      {"ridge_width", p.ridge_width},
      {"texture_amplitude", p.texture_amplitude},
      {"noise_level", p.noise_level},
      {"blob_min", p.blob_min},
      {"blob_max", p.blob_max},
      {"blob_sigma_min", p.blob_sigma_min},
      {"blob_sigma_max", p.blob_sigma_max},
      {"blob_delta", p.blob_delta},
  };
}

void from_json(const nlohmann::json& j, PhantomParams& p) {
  nlohmann::json defaults;
  to_json(defaults, PhantomParams{});
  for (const auto& [key, _] : j.items()) {
    if (!defaults.contains(key)) {
      throw Error(ErrorCode::kConfig, "unknown phantom parameter: " + key);
    }
  }
  read_field(j, "image_size", p.image_size);
  read_field(j, "background", p.background);
  read_field(j, "organ_level", p.organ_level);
  read_field(j, "rim_level", p.rim_level);
  read_field(j, "rim_width", p.rim_width);
  read_field(j, "organ_axis_min", p.organ_axis_min);
  read_field(j, "organ_axis_max", p.organ_axis_max);
  read_field(j, "organ_center_jitter", p.organ_center_jitter);
  read_field(j, "organ_max_rotation", p.organ_max_rotation);
  read_field(j, "ridge_min", p.ridge_min);
  read_field(j, "ridge_max", p.ridge_max);
  read_field(j, "ridge_amplitude", p.ridge_amplitude);
  read_field(j, "ridge_width", p.ridge_width);
  read_field(j, "texture_amplitude", p.texture_amplitude);
  read_field(j, "noise_level", p.noise_level);
  read_field(j, "blob_min", p.blob_min);
  read_field(j, "blob_max", p.blob_max);
  read_field(j, "blob_sigma_min", p.blob_sigma_min);
  read_field(j, "blob_sigma_max", p.blob_sigma_max);
  read_field(j, "blob_delta", p.blob_delta);
}

Mask organ_region(std::uint64_t structure_seed, const PhantomParams& params) {
  return region_mask(make_anatomy(structure_seed, params), params, 1.0);
}

Mask organ_interior(std::uint64_t structure_seed, const PhantomParams& params) {
  const Anatomy an = make_anatomy(structure_seed, params);
  return region_mask(an, params, an.interior_rho);
}

ImageSample generate_sample(std::uint64_t structure_seed,
                            std::optional<std::uint64_t> pathology_seed,
                            const PhantomParams& params) {
  params.validate();
  const Anatomy an = make_anatomy(structure_seed, params);
  ImageSample sample;
  sample.pixels = render_anatomy(an, params);
  sample.structure_seed = structure_seed;
  sample.pathology_seed = pathology_seed;
  if (!pathology_seed) return sample;

  const int size = params.image_size;
  const Mask interior = region_mask(an, params, an.interior_rho);
  const double a_in = an.a * an.interior_rho, b_in = an.b * an.interior_rho;
  Rng rng(derive_seed(*pathology_seed, structure_seed));
  Grid<double> added(size, size, 0.0);
  Mask mask(size, size);

  const int n_blobs = rng.uniform_int(params.blob_min, params.blob_max);
  for (int k = 0; k < n_blobs; ++k) {
    const double sigma = size * rng.uniform(params.blob_sigma_min, params.blob_sigma_max);
    const double radius = sigma * kHalfMaxRadius;
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      // Uniform point in the interior ellipse shrunk by the blob radius.
      const double r = std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double u = r * std::max(a_in - radius, 0.0) * std::cos(phi);
      const double v = r * std::max(b_in - radius, 0.0) * std::sin(phi);
      const double bx = an.cx + u * an.cos_t - v * an.sin_t;
      const double by = an.cy + u * an.sin_t + v * an.cos_t;

      const int r0 = std::max(0, static_cast<int>(std::floor(by - radius - 1)));
      const int r1 = std::min(size - 1, static_cast<int>(std::ceil(by + radius + 1)));
      const int c0 = std::max(0, static_cast<int>(std::floor(bx - radius - 1)));
      const int c1 = std::min(size - 1, static_cast<int>(std::ceil(bx + radius + 1)));
      bool inside = true;
      for (int rr = r0; rr <= r1 && inside; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          const double dx = cc + 0.5 - bx, dy = rr + 0.5 - by;
          if (dx * dx + dy * dy < radius * radius && !interior(rr, cc)) {
            inside = false;
            break;
          }
        }
      }
      if (!inside) continue;
      placed = true;
      // Gaussian profile truncated at half maximum: the blob contributes
      // nothing outside its mask.
      for (int rr = r0; rr <= r1; ++rr) {
        for (int cc = c0; cc <= c1; ++cc) {
          const double dx = cc + 0.5 - bx, dy = rr + 0.5 - by;
          const double d2 = dx * dx + dy * dy;
          if (d2 < radius * radius) {
            added(rr, cc) += params.blob_delta * std::exp(-d2 / (2.0 * sigma * sigma));
            mask(rr, cc) = 1;
          }
        }
      }
    }
    if (!placed) {
      throw Error(ErrorCode::kConfig, "could not place pathology blob inside the organ",
                  {{"structure_seed", std::to_string(structure_seed)},
                   {"pathology_seed", std::to_string(*pathology_seed)}});
    }
  }

  for (std::size_t i = 0; i < sample.pixels.size(); ++i) {
    if (mask[i]) {
      sample.pixels[i] = static_cast<float>(
          std::clamp(static_cast<double>(sample.pixels[i]) + added[i], 0.0, 1.0));
    }
  }
  sample.label = 1;
  sample.mask = std::move(mask);
  return sample;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json samples_json = nlohmann::json::array();
  for (const auto& e : samples) {
    samples_json.push_back({
        {"file", e.file},
        {"label", e.label},
        {"structure_seed", e.structure_seed},
        {"pathology_seed", e.pathology_seed ? nlohmann::json(*e.pathology_seed)
                                            : nlohmann::json(nullptr)},
        {"mask", e.mask_file ? nlohmann::json(*e.mask_file) : nlohmann::json(nullptr)},
    });
  }
  return {
      {"version", version},
      {"image_size", image_size},
      {"counts", {{"negative", count_negative}, {"positive", count_positive}}},
      {"root_seed", root_seed},
      {"generator_params", generator_params},
      {"samples", std::move(samples_json)},
  };
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<std::string>();
    m.image_size = j.at("image_size").get<int>();
    m.count_negative = j.at("counts").at("negative").get<int>();
    m.count_positive = j.at("counts").at("positive").get<int>();
    m.root_seed = j.at("root_seed").get<std::uint64_t>();
    m.generator_params = j.at("generator_params").get<PhantomParams>();
    for (const auto& s : j.at("samples")) {
      DatasetEntry e;
      e.file = s.at("file").get<std::string>();
      e.label = s.at("label").get<int>();
      e.structure_seed = s.at("structure_seed").get<std::uint64_t>();
      if (!s.at("pathology_seed").is_null())
        e.pathology_seed = s.at("pathology_seed").get<std::uint64_t>();
      if (!s.at("mask").is_null()) e.mask_file = s.at("mask").get<std::string>();
      m.samples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed dataset manifest: ") + e.what());
  }
  if (m.version != kVersion) {
    throw Error(ErrorCode::kConfig, "unsupported dataset manifest version: " + m.version);
  }
  int neg = 0, pos = 0;
  for (const auto& e : m.samples) (e.label ? pos : neg)++;
  if (neg != m.count_negative || pos != m.count_positive) {
    throw Error(ErrorCode::kConfig, "dataset manifest counts do not match its index");
  }
  return m;
}

std::string DatasetManifest::content_hash() const {
  return sha256_hex(canonical_dump(to_json()));
}

DatasetManifest build_dataset(const PhantomParams& params, int n_per_class,
                              std::uint64_t root_seed, const fs::path& out_dir,
                              bool overwrite) {
  params.validate();
  if (n_per_class < 1) {
    throw Error(ErrorCode::kConfig, "n_per_class must be at least 1");
  }
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    if (!overwrite) {
      throw Error(ErrorCode::kIo, "output directory is not empty (use overwrite)",
                  {{"path", out_dir.string()}});
    }
    fs::remove_all(out_dir);
  }
  fs::create_directories(out_dir);

  DatasetManifest manifest;
  manifest.image_size = params.image_size;
  manifest.count_negative = n_per_class;
  manifest.count_positive = n_per_class;
  manifest.root_seed = root_seed;
  manifest.generator_params = params;

  for (int i = 0; i < 2 * n_per_class; ++i) {
    const bool positive = i >= n_per_class;
    DatasetEntry entry;
    entry.label = positive ? 1 : 0;
    entry.structure_seed = derive_seed(root_seed, 2 * static_cast<std::uint64_t>(i));
    if (positive) {
      entry.pathology_seed = derive_seed(root_seed, 2 * static_cast<std::uint64_t>(i) + 1);
    }
    const std::string name = zero_padded(i) + ".png";
    entry.file = std::string("images/") + (positive ? "pos/" : "neg/") + name;
    const ImageSample sample =
        generate_sample(entry.structure_seed, entry.pathology_seed, params);
    write_png(out_dir / entry.file, sample.pixels);
    if (positive) {
      entry.mask_file = "masks/" + name;
      write_png(out_dir / *entry.mask_file, *sample.mask);
    }
    manifest.samples.push_back(std::move(entry));
  }
  write_json(out_dir / "manifest.json", manifest.to_json());
  return manifest;
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.root = dir;
  ds.manifest = DatasetManifest::from_json(read_json(dir / "manifest.json"));
  ds.samples.reserve(ds.manifest.samples.size());
  for (const auto& e : ds.manifest.samples) {
    const fs::path path = dir / e.file;
    if (!fs::exists(path)) {
      throw Error(ErrorCode::kMissingArtifact, "dataset image listed but missing",
                  {{"path", path.string()}});
    }
    ImageSample s;
    s.pixels = read_png_image(path);
    if (s.pixels.height() != ds.manifest.image_size ||
        s.pixels.width() != ds.manifest.image_size) {
      throw Error(ErrorCode::kShape, "dataset image has wrong size",
                  {{"path", path.string()}});
    }
    s.label = e.label;
    s.structure_seed = e.structure_seed;
    s.pathology_seed = e.pathology_seed;
    if (e.mask_file) s.mask = read_png_mask(dir / *e.mask_file);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace medxgan

/*
 * Copyright (c) 2026, The davit-logo Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "davit/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "davit/error.hpp"

namespace davit {

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.class_index >= class_names.size() || s.label.size() != class_names.size()) {
      throw DataError("sample " + std::to_string(i) + " has a label outside the class list");
    }
    if (s.image.width != image_size || s.image.height != image_size) {
      throw DataError("sample " + std::to_string(i) + " is not " + std::to_string(image_size) + "x" +
                      std::to_string(image_size));
    }
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

struct ManifestRow {
  std::size_t line = 0;
  std::string path, label, tag;
  double weight = 1.0;
};

}  // namespace

Dataset load_dataset(const std::filesystem::path& manifest, const std::vector<std::string>& class_names) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest " + manifest.string() + " is empty");
  const auto header = split_csv_row(line);
  if (header.size() < 2 || header[0] != "relative_path" || header[1] != "label_name") {
    throw DataError("manifest " + manifest.string() + ": header must start with relative_path,label_name");
  }

  std::vector<ManifestRow> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    const auto f = split_csv_row(line);
    const std::string where = manifest.string() + " row " + std::to_string(n);
    if (f.size() < 2 || f.size() > 4 || f[0].empty() || f[1].empty()) {
      throw DataError("malformed manifest row: " + where);
    }
    ManifestRow r{n, f[0], f[1], f.size() > 2 ? f[2] : "", 1.0};
    if (f.size() > 3 && !f[3].empty()) {
      std::size_t used = 0;
      try {
        r.weight = std::stod(f[3], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f[3].size() || !(r.weight > 0.0) || !std::isfinite(r.weight)) {
        throw DataError("malformed manifest row: " + where + " has weight '" + f[3] + "'");
      }
    }
    rows.push_back(std::move(r));
  }

  Dataset ds;
  ds.class_names = class_names;
  if (ds.class_names.empty()) {
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.label);
    ds.class_names.assign(names.begin(), names.end());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) index[ds.class_names[i]] = i;

  const auto base = manifest.parent_path();
  for (const auto& r : rows) {
    const std::string where = manifest.string() + " row " + std::to_string(r.line);
    auto it = index.find(r.label);
    if (it == index.end()) throw DataError("label '" + r.label + "' outside the class list at " + where);
    const auto file = base / r.path;
    if (!std::filesystem::exists(file)) throw DataError("missing image " + file.string() + " at " + where);
    Sample s;
    try {
      s.image = read_ppm(file);
    } catch (const DataError& e) {
      throw DataError(std::string(e.what()) + " at " + where);
    }
    if (s.image.width != s.image.height) throw DataError("non-square image at " + where);
    if (ds.image_size == 0) ds.image_size = s.image.width;
    if (s.image.width != ds.image_size) {
      throw DataError("image size " + std::to_string(s.image.width) + " differs from " +
                      std::to_string(ds.image_size) + " at " + where);
    }
    s.class_index = it->second;
    s.label.assign(ds.class_names.size(), 0.0);
    s.label[s.class_index] = 1.0;
    s.weight = r.weight;
    s.tag = r.tag;
    s.path = r.path;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed,
                                          const std::set<std::string>& holdout_tags) {
  if (ds.empty()) throw DataError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  Dataset train, val;
  train.class_names = val.class_names = ds.class_names;
  train.image_size = val.image_size = ds.image_size;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (holdout_tags.count(ds.samples[i].tag)) {
      val.samples.push_back(ds.samples[i]);
    } else {
      rest.push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(double(rest.size()) * train_fraction));
  for (std::size_t i = 0; i < rest.size(); ++i) {
    (i < n_train ? train : val).samples.push_back(ds.samples[rest[i]]);
  }
  return {std::move(train), std::move(val)};
}

Sample mixup(const Sample& a, const Sample& b, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DataError("mixup lambda must lie in [0, 1]");
  if (a.image.width != b.image.width || a.image.height != b.image.height || a.label.size() != b.label.size()) {
    throw ShapeError("mixup: samples differ in image size or class count");
  }
  // The larger weight is derived from the smaller one by an exact subtraction,
  // so mixup(a, b, l) and mixup(b, a, 1 - l) use identical weights.
  double wa, wb;
  if (lambda >= 0.5) {
    wa = lambda;
    wb = 1.0 - lambda;
  } else {
    wb = 1.0 - lambda;
    wa = 1.0 - wb;
  }
  // metadata (class index, weight, tag) follows the dominant sample
  Sample out = wa >= wb ? a : b;
  for (std::size_t i = 0; i < out.image.pixels.size(); ++i) {
    const float pa = a.image.pixels[i], pb = b.image.pixels[i];
    const double v = wa * double(pa) + wb * double(pb);
    out.image.pixels[i] = std::clamp(static_cast<float>(v), std::min(pa, pb), std::max(pa, pb));
  }
  for (std::size_t k = 0; k < out.label.size(); ++k) out.label[k] = wa * a.label[k] + wb * b.label[k];
  return out;
}

double sample_mixup_lambda(double alpha, std::mt19937_64& rng) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("mixup alpha must be >= 0");
  if (alpha == 0.0) return std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double x = gamma(rng), y = gamma(rng);
  if (x + y == 0.0) return std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
  return x / (x + y);
}

std::vector<std::size_t> weighted_sampler(const Dataset& ds, std::size_t epoch_length, std::uint64_t seed) {
  if (ds.empty()) throw DataError("cannot sample from an empty dataset");
  std::vector<double> w;
  w.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double v = ds.samples[i].weight;
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DataError("sample " + std::to_string(i) + " has non-positive weight " + std::to_string(v));
    }
    w.push_back(v);
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out(epoch_length);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::size_t apply_tag_weight(Dataset& ds, const std::string& tag, double weight) {
  if (!(weight > 0.0)) throw ConfigError("sample weight must be > 0");
  std::size_t n = 0;
  for (auto& s : ds.samples) {
    if (s.tag == tag) {
      s.weight = weight;
      ++n;
    }
  }
  return n;
}

Dataset subset_with_tag(const Dataset& ds, const std::string& tag) {
  Dataset out;
  out.class_names = ds.class_names;
  out.image_size = ds.image_size;
  for (const auto& s : ds.samples) {
    if (s.tag == tag) out.samples.push_back(s);
  }
  return out;
}

std::pair<Tensorf, Tensorf> make_batch(const std::vector<Sample>& samples, std::size_t num_classes) {
  if (samples.empty()) throw DataError("empty batch");
  const std::size_t h = samples[0].image.height, w = samples[0].image.width, per = 3 * h * w;
  Tensorf images({samples.size(), 3, h, w});
  Tensorf targets({samples.size(), num_classes});
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const Sample& s = samples[b];
    if (s.image.pixels.size() != per || s.label.size() != num_classes) {
      throw ShapeError("make_batch: sample " + std::to_string(b) + " does not match the batch layout");
    }
    std::transform(s.image.pixels.begin(), s.image.pixels.end(), images.data().begin() + b * per,
                   [](float p) { return (p - kPixelMean) / kPixelStd; });
    for (std::size_t k = 0; k < num_classes; ++k) targets[b * num_classes + k] = static_cast<float>(s.label[k]);
  }
  return {images, targets};
}

namespace {

enum class Shape2d { Circle, Square, Triangle, Cross, Ring };

bool inside(Shape2d shape, double dx, double dy, double r) {
  switch (shape) {
    case Shape2d::Circle:
      return dx * dx + dy * dy <= r * r;
    case Shape2d::Square:
      return std::max(std::abs(dx), std::abs(dy)) <= r * 0.85;
    case Shape2d::Triangle:
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) * 0.5;
    case Shape2d::Cross:
      return (std::abs(dx) <= r * 0.3 && std::abs(dy) <= r) || (std::abs(dy) <= r * 0.3 && std::abs(dx) <= r);
    case Shape2d::Ring: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.36 * r * r;
    }
  }
  return false;
}

}  // namespace

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticSpec& spec) {
  if (spec.per_class == 0 || spec.image_size < 8) throw ConfigError("synthetic dataset needs per_class >= 1, size >= 8");
  if (spec.hard_per_class > spec.per_class) throw ConfigError("hard_per_class exceeds per_class");
  const std::pair<const char*, Shape2d> shapes[] = {{"circle", Shape2d::Circle},
                                                    {"square", Shape2d::Square},
                                                    {"triangle", Shape2d::Triangle},
                                                    {"cross", Shape2d::Cross},
                                                    {"ring", Shape2d::Ring}};
  const std::pair<const char*, std::array<double, 3>> colours[] = {{"red", {0.85, 0.15, 0.10}},
                                                                   {"blue", {0.10, 0.25, 0.85}}};
  std::filesystem::create_directories(dir / "images");
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError("cannot write manifest under " + dir.string());
  manifest << "relative_path,label_name,tag\n";

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double s = double(spec.image_size);
  constexpr double kJitter = 0.06;
  std::size_t counter = 0;
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    const bool hard = i >= spec.per_class - spec.hard_per_class;
    for (const auto& [shape_name, shape] : shapes) {
      for (const auto& [colour_name, rgb] : colours) {
        const double bg = 0.35 + 0.3 * u(rng);
        const double r = s * (0.40 + 0.06 * u(rng));
        const double cx = s / 2 + (u(rng) - 0.5) * s * kJitter, cy = s / 2 + (u(rng) - 0.5) * s * kJitter;
        const double contrast = hard ? 0.35 : 1.0;
        Image img = Image::blank(spec.image_size, spec.image_size);
        for (std::size_t y = 0; y < spec.image_size; ++y) {
          for (std::size_t x = 0; x < spec.image_size; ++x) {
            const bool in = inside(shape, double(x) + 0.5 - cx, double(y) + 0.5 - cy, r);
            for (std::size_t c = 0; c < 3; ++c) {
              const double noise = (u(rng) - 0.5) * 0.1;
              const double v = in ? bg + contrast * (rgb[c] - bg) : bg;
              img.at(c, y, x) = static_cast<float>(std::clamp(v + noise, 0.0, 1.0));
            }
          }
        }
        char name[32];
        std::snprintf(name, sizeof name, "img_%04zu.ppm", counter++);
        write_ppm(dir / "images" / name, img);
        manifest << "images/" << name << ',' << shape_name << '_' << colour_name << ',' << (hard ? "hard" : "")
                 << '\n';
      }
    }
  }
  if (!manifest) throw DataError("failed writing manifest under " + dir.string());
  return dir / "manifest.csv";
}

}  // namespace davit

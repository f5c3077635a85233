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

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "davit/image.hpp"
#include "davit/tensor.hpp"

namespace davit {

struct Sample {
  Image image;
  std::vector<double> label;  // one-hot when loaded, soft after mixup
  std::size_t class_index = 0;
  double weight = 1.0;
  std::string tag;
  std::string path;  // manifest-relative, empty for derived samples
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  std::size_t image_size = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  void validate() const;
};

// Manifest: header row, then `relative_path,label_name[,tag][,weight]`.
// With an empty class list the classes are the sorted distinct label names.
Dataset load_dataset(const std::filesystem::path& manifest, const std::vector<std::string>& class_names = {});

// Tagged samples go to validation unconditionally; the rest are shuffled and
// split with floor(n * train_fraction) for training.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed,
                                          const std::set<std::string>& holdout_tags);

Sample mixup(const Sample& a, const Sample& b, double lambda);

// Beta(alpha, alpha); alpha == 0 degenerates to a fair coin over {0, 1}.
double sample_mixup_lambda(double alpha, std::mt19937_64& rng);

// Indices drawn with replacement, probability proportional to sample weight.
std::vector<std::size_t> weighted_sampler(const Dataset& ds, std::size_t epoch_length, std::uint64_t seed);

// Sets weight `w` on every sample carrying `tag`; returns how many matched.
std::size_t apply_tag_weight(Dataset& ds, const std::string& tag, double weight);
Dataset subset_with_tag(const Dataset& ds, const std::string& tag);

// Pixels enter the model as (p - kPixelMean) / kPixelStd.
inline constexpr float kPixelMean = 0.5f;
inline constexpr float kPixelStd = 0.25f;

// Stacks normalized images into B x 3 x S x S and labels into B x K.
std::pair<Tensorf, Tensorf> make_batch(const std::vector<Sample>& samples, std::size_t num_classes);

struct SyntheticSpec {
  std::size_t per_class = 16;
  std::size_t image_size = 32;
  std::uint64_t seed = 1;
  std::size_t hard_per_class = 2;  // low-contrast renders tagged "hard"
};

// Ten classes (five shapes in two colours) written as P6 files plus
// manifest.csv under `dir`. Returns the manifest path.
std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir, const SyntheticSpec& spec);

}  // namespace davit

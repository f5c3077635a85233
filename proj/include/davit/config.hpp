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
#include <string>
#include <vector>

#include "davit/bench.hpp"
#include "davit/model.hpp"
#include "davit/train.hpp"

namespace davit {

// Everything a command needs, assembled from one or more config files and
// command-line overrides. Relative paths in a file resolve against that
// file's directory.
struct RunConfig {
  std::string name = "base";
  ModelConfig model = ModelConfig::base();
  TrainConfig train;

  std::filesystem::path manifest;
  std::filesystem::path policy;  // empty = no augmentation
  std::vector<std::string> classes;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  std::string holdout_tag = "holdout";
  std::string hard_tag = "hard";
  double hard_weight = 1.0;

  std::filesystem::path output_dir = "runs";
  double threshold = 0.5;
  std::size_t eval_batch = 32;

  BenchOptions bench;

  void set_seed(std::uint64_t seed);
  void validate() const;
};

// `[section]` headers and `key = value` lines; '#' or ';' at the start of a
// line is a comment. Sections: model, train, data, run, bench. `model.preset`
// replaces the whole model and must precede other model keys to keep them.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source,
                       const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Single override in `section.key=value` form.
void apply_override(RunConfig& cfg, const std::string& assignment);

}  // namespace davit

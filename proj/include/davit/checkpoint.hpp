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
#include <utility>
#include <vector>

#include "davit/model.hpp"
#include "davit/train.hpp"

namespace davit {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  std::uint64_t val_correct = 0;
  std::uint64_t val_total = 0;
  std::uint64_t config_hash = 0;

  double val_accuracy() const { return val_total ? double(val_correct) / double(val_total) : 0.0; }
};

struct CheckpointFile {
  std::vector<std::pair<std::string, Tensorf>> tensors;  // in file order
  CheckpointMeta meta;
  bool has_optimizer = false;

  const Tensorf* find(const std::string& name) const;
};

// Raw tensor list I/O. Throws CheckpointCorruptError on bad magic, unknown
// version, truncation or trailing bytes.
void write_tensor_file(const std::filesystem::path& path, const std::vector<std::pair<std::string, Tensorf>>& tensors);
std::vector<std::pair<std::string, Tensorf>> read_tensor_file(const std::filesystem::path& path);

// Written to `path`.partial then renamed, so a crash never leaves a half file under the final name.
void save_checkpoint(const std::filesystem::path& path, const Model<float>& model, const CheckpointMeta& meta,
                     const OptimizerState<float>* state = nullptr);

CheckpointFile read_checkpoint(const std::filesystem::path& path);

// Copies parameters into `model`. Throws CheckpointMismatchError naming the
// first missing or mis-shaped tensor, and CheckpointHashError when the stored
// config hash differs and `force` is false.
void load_into(Model<float>& model, const CheckpointFile& ckpt, bool force = false,
               OptimizerState<float>* state = nullptr);

}  // namespace davit

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
#include <functional>
#include <string>
#include <vector>

#include "davit/augment.hpp"
#include "davit/dataset.hpp"
#include "davit/model.hpp"
#include "davit/tensor.hpp"

namespace davit {

struct TrainConfig {
  double base_lr = 1e-3;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 100;
  std::size_t batch_size = 8;
  double weight_decay = 0.05;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double mixup_alpha = 0.2;
  std::uint64_t seed = 0;
  bool cosine = false;  // decay after warmup instead of holding base_lr

  void validate() const;
};

template <typename Real>
struct OptimizerState {
  std::vector<std::vector<Real>> m, v;  // one entry per parameter, same order as the parameter list
  std::uint64_t step = 0;

  bool initialized() const { return !m.empty(); }
};

// Mean over the batch of -sum_k t_k log softmax(z)_k. Rows of `targets` must sum to 1 within 1e-6.
template <typename Real>
Tensor<Real> soft_cross_entropy(const Tensor<Real>& logits, const Tensor<Real>& targets);

// One decoupled-decay Adam update using each parameter's accumulated gradient
// (parameters without a gradient see g = 0).
template <typename Real>
void adamw_step(const std::vector<Tensor<Real>>& params, OptimizerState<Real>& state, const TrainConfig& cfg,
                double lr);

double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

// Stateless 64-bit mixer used to derive per-epoch and per-item seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

struct EpochMetrics {
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // argmax vs dominant target class on the augmented, mixed batches
  std::size_t steps = 0;
};

EpochMetrics train_epoch(Model<float>& model, const Dataset& train, const AugmentPolicy& policy,
                         const TrainConfig& cfg, std::size_t epoch, OptimizerState<float>& state);

struct EvalReport {
  double threshold = 0.0;
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t rejected = 0;  // max probability below threshold
  double accuracy = 0.0;
  std::vector<std::string> class_names;
  std::vector<std::size_t> class_total, class_correct;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted argmax]
  std::vector<std::size_t> misclassified;           // sample indices counted incorrect

  std::string to_json() const;
};

EvalReport evaluate(const Model<float>& model, const Dataset& val, double threshold, std::size_t batch_size = 32);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::size_t rejected = 0;

  std::string to_json() const;
};

struct FitOptions {
  std::filesystem::path output_dir;  // best.ckpt, last.ckpt, metrics.jsonl; empty = no files
  double threshold = 0.5;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  EvalReport best_eval;
  EvalReport last_eval;
};

FitResult fit(Model<float>& model, const Dataset& train, const Dataset& val, const AugmentPolicy& policy,
              const TrainConfig& cfg, const FitOptions& opts);

}  // namespace davit

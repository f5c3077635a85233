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

#include "davit/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>

#include "davit/checkpoint.hpp"
#include "davit/error.hpp"
#include "davit/ops.hpp"
#include "json.hpp"

namespace davit {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("train: base_lr must be > 0");
  if (total_epochs < 1) throw ConfigError("train: total_epochs must be >= 1");
  if (warmup_epochs > total_epochs) throw ConfigError("train: warmup_epochs must not exceed total_epochs");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train: eps must be > 0");
  if (!(mixup_alpha >= 0.0) || !std::isfinite(mixup_alpha)) throw ConfigError("train: mixup_alpha must be >= 0");
}

template <typename Real>
Tensor<Real> soft_cross_entropy(const Tensor<Real>& logits, const Tensor<Real>& targets) {
  if (logits.rank() != 2 || targets.shape() != logits.shape()) {
    throw ShapeError("soft_cross_entropy: expected matching B x K logits and targets, got " +
                     shape_str(logits.shape()) + " and " + shape_str(targets.shape()));
  }
  const std::size_t b = logits.dim(0), k = logits.dim(1);
  auto z = logits.data();
  auto t = targets.data();
  // log-softmax rows, kept for the backward pass
  auto log_probs = std::make_shared<std::vector<double>>(b * k);
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) row_sum += double(t[r * k + j]);
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ShapeError("soft_cross_entropy: target row " + std::to_string(r) + " sums to " + std::to_string(row_sum));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, double(z[r * k + j]));
    double se = 0.0;
    for (std::size_t j = 0; j < k; ++j) se += std::exp(double(z[r * k + j]) - mx);
    const double lse = mx + std::log(se);
    for (std::size_t j = 0; j < k; ++j) {
      const double lp = double(z[r * k + j]) - lse;
      (*log_probs)[r * k + j] = lp;
      if (t[r * k + j] != Real(0)) total -= double(t[r * k + j]) * lp;
    }
  }
  Tensor<Real> out = Tensor<Real>::from_values({1}, {static_cast<Real>(total / double(b))});
  check_finite(out, "soft_cross_entropy");
  if (auto* tape = Tape<Real>::recording({&logits})) {
    tape->record("soft_cross_entropy", {logits, targets}, out,
                 [logits, targets, log_probs, b, k](std::span<const Real> g) {
                   auto d = logits.grad_mut();
                   auto tt = targets.data();
                   const double scale = double(g[0]) / double(b);
                   // rows of t sum to one, so d/dz = softmax(z) - t
                   for (std::size_t i = 0; i < b * k; ++i) {
                     d[i] += static_cast<Real>(scale * (std::exp((*log_probs)[i]) - double(tt[i])));
                   }
                 });
  }
  return out;
}

template <typename Real>
void adamw_step(const std::vector<Tensor<Real>>& params, OptimizerState<Real>& state, const TrainConfig& cfg,
                double lr) {
  if (!(lr > 0.0)) throw ConfigError("adamw: learning rate must be > 0");
  if (!state.initialized()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), Real(0));
      state.v.emplace_back(p.numel(), Real(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adamw: optimizer state holds " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel() || state.v[i].size() != params[i].numel()) {
      throw ShapeError("adamw: state shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Real> p = params[i];
    auto theta = p.data();
    const bool has = p.has_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const long long n = (long long)theta.size();
    const Real* g = has ? p.grad().data() : nullptr;
#pragma omp parallel for schedule(static)
    for (long long j = 0; j < n; ++j) {
      const double gj = g ? double(g[j]) : 0.0;
      const double mj = cfg.beta1 * double(m[j]) + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * double(v[j]) + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<Real>(mj);
      v[j] = static_cast<Real>(vj);
      const double mhat = mj / c1, vhat = vj / c2;
      const double th = double(theta[j]);
      theta[j] = static_cast<Real>(th - lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * th));
    }
  }
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch < cfg.warmup_epochs) return cfg.base_lr * double(epoch + 1) / double(cfg.warmup_epochs);
  if (!cfg.cosine || cfg.total_epochs <= cfg.warmup_epochs) return cfg.base_lr;
  const double progress = double(epoch - cfg.warmup_epochs) / double(cfg.total_epochs - cfg.warmup_epochs);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::size_t argmax(const float* row, std::size_t k) {
  return std::size_t(std::max_element(row, row + k) - row);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix64(base ^ splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ull)));
}

EpochMetrics train_epoch(Model<float>& model, const Dataset& train, const AugmentPolicy& policy,
                         const TrainConfig& cfg, std::size_t epoch, OptimizerState<float>& state) {
  cfg.validate();
  if (train.empty()) throw DataError("training set is empty");
  const std::size_t k = model.config.num_classes;
  if (train.class_names.size() != k) {
    throw DataError("training set has " + std::to_string(train.class_names.size()) + " classes, model expects " +
                    std::to_string(k));
  }
  const double lr = lr_schedule(epoch, cfg);
  const std::uint64_t epoch_seed = derive_seed(cfg.seed, epoch);
  const auto order = weighted_sampler(train, train.size(), derive_seed(epoch_seed, 1));
  std::mt19937_64 lambda_rng(derive_seed(epoch_seed, 2));
  auto params = model.parameters();
  model.set_requires_grad(true);

  EpochMetrics metrics;
  double loss_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    std::vector<Sample> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const Sample& s = train.samples[order[i]];
      batch.push_back(policy.empty() ? s : apply_policy(s, policy, derive_seed(epoch_seed, 3, i)));
    }
    // consecutive items pair up; an odd one out stays unmixed
    for (std::size_t j = 0; j + 1 < batch.size(); j += 2) {
      const double lambda = sample_mixup_lambda(cfg.mixup_alpha, lambda_rng);
      Sample first = mixup(batch[j], batch[j + 1], lambda);
      Sample second = mixup(batch[j + 1], batch[j], lambda);
      batch[j] = std::move(first);
      batch[j + 1] = std::move(second);
    }
    auto [images, targets] = make_batch(batch, k);
    for (auto& p : params) p.zero_grad();
    double loss_value;
    {
      Tape<float> tape;
      Tensorf logits = forward(images, model);
      Tensorf loss = soft_cross_entropy(logits, targets);
      tape.backward(loss);
      loss_value = loss.item();
      for (std::size_t r = 0; r < batch.size(); ++r) {
        hits += argmax(logits.data().data() + r * k, k) == argmax(targets.data().data() + r * k, k);
      }
    }
    adamw_step(params, state, cfg, lr);
    loss_sum += loss_value * double(batch.size());
    ++metrics.steps;
  }
  metrics.mean_loss = loss_sum / double(order.size());
  metrics.train_accuracy = double(hits) / double(order.size());
  return metrics;
}

EvalReport evaluate(const Model<float>& model, const Dataset& val, double threshold, std::size_t batch_size) {
  if (val.empty()) throw DataError("evaluation set is empty");
  if (!(threshold >= 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in [0, 1)");
  const std::size_t k = model.config.num_classes;
  if (val.class_names.size() != k) {
    throw DataError("evaluation set has " + std::to_string(val.class_names.size()) + " classes, model expects " +
                    std::to_string(k));
  }
  EvalReport r;
  r.threshold = threshold;
  r.total = val.size();
  r.class_names = val.class_names;
  r.class_total.assign(k, 0);
  r.class_correct.assign(k, 0);
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  batch_size = std::max<std::size_t>(1, batch_size);
  for (std::size_t start = 0; start < val.size(); start += batch_size) {
    const std::size_t end = std::min(val.size(), start + batch_size);
    std::vector<Sample> batch(val.samples.begin() + long(start), val.samples.begin() + long(end));
    auto images = make_batch(batch, k).first;
    const Tensorf logits = forward(images, model);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const float* row = logits.data().data() + i * k;
      const std::size_t pred = argmax(row, k);
      double se = 0.0;
      for (std::size_t j = 0; j < k; ++j) se += std::exp(double(row[j]) - double(row[pred]));
      const double max_prob = 1.0 / se;
      const std::size_t truth = batch[i].class_index;
      ++r.class_total[truth];
      ++r.confusion[truth][pred];
      const bool confident = max_prob >= threshold;
      if (!confident) ++r.rejected;
      if (pred == truth && confident) {
        ++r.correct;
        ++r.class_correct[truth];
      } else {
        r.misclassified.push_back(start + i);
      }
    }
  }
  r.accuracy = double(r.correct) / double(r.total);
  r.per_class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    r.per_class_accuracy[c] = r.class_total[c] ? double(r.class_correct[c]) / double(r.class_total[c]) : 0.0;
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["threshold"] = threshold;
  j["total"] = total;
  j["correct"] = correct;
  j["accuracy"] = accuracy;
  j["rejected_count"] = rejected;
  j["class_names"] = class_names;
  j["class_total"] = class_total;
  j["per_class_accuracy"] = per_class_accuracy;
  j["confusion"] = confusion;
  j["misclassified"] = misclassified;
  return j.dump(2);
}

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["lr"] = lr;
  j["train_loss"] = train_loss;
  j["train_acc"] = train_acc;
  j["val_acc"] = val_acc;
  j["rejected"] = rejected;
  return j.dump();
}

FitResult fit(Model<float>& model, const Dataset& train, const Dataset& val, const AugmentPolicy& policy,
              const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  policy.validate();
  if (val.empty()) throw DataError("validation set is empty");
  const bool write = !opts.output_dir.empty();
  std::ofstream metrics;
  std::filesystem::path partial;
  if (write) {
    std::filesystem::create_directories(opts.output_dir);
    partial = opts.output_dir / "metrics.jsonl.partial";
    metrics.open(partial);
    if (!metrics) throw DataError("cannot write " + partial.string());
  }
  FitResult result;
  OptimizerState<float> state;
  bool have_best = false;
  for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const EpochMetrics m = train_epoch(model, train, policy, cfg, epoch, state);
    EvalReport ev = evaluate(model, val, opts.threshold);
    EpochRecord rec{epoch, lr_schedule(epoch, cfg), m.mean_loss, m.train_accuracy, ev.accuracy, ev.rejected};
    result.history.push_back(rec);
    const CheckpointMeta meta{epoch, ev.correct, ev.total, model.config.hash()};
    if (!have_best || ev.correct > result.best_eval.correct) {
      have_best = true;
      result.best_epoch = epoch;
      result.best_eval = ev;
      if (write) save_checkpoint(opts.output_dir / "best.ckpt", model, meta, &state);
    }
    if (write) {
      save_checkpoint(opts.output_dir / "last.ckpt", model, meta, &state);
      metrics << rec.to_json() << '\n' << std::flush;
    }
    if (opts.on_epoch) opts.on_epoch(rec);
    result.last_eval = std::move(ev);
  }
  if (write) {
    metrics.close();
    std::filesystem::rename(partial, opts.output_dir / "metrics.jsonl");
  }
  return result;
}

#define DAVIT_INSTANTIATE(Real)                                                                       \
  template Tensor<Real> soft_cross_entropy<Real>(const Tensor<Real>&, const Tensor<Real>&);           \
  template void adamw_step<Real>(const std::vector<Tensor<Real>>&, OptimizerState<Real>&, const TrainConfig&, \
                                 double);

DAVIT_INSTANTIATE(float)
DAVIT_INSTANTIATE(double)

#undef DAVIT_INSTANTIATE

}  // namespace davit

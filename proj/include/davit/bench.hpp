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

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "davit/model.hpp"

namespace davit {

struct BenchOptions {
  std::size_t batch_size = 1;
  std::size_t warmup_iters = 20;
  std::size_t timed_iters = 100;
  std::uint64_t seed = 0;
  std::size_t runs = 1;  // repeated measurements; the median-fps run is reported
};

struct BenchReport {
  std::string model_name;
  std::size_t param_count = 0;
  std::size_t batch_size = 0;
  std::size_t warmup_iters = 0, timed_iters = 0;
  double elapsed_s = 0.0;
  double fps = 0.0;  // batch_size * timed_iters / elapsed_s
  double lat_mean_ms = 0.0, lat_p50_ms = 0.0, lat_p95_ms = 0.0;
  std::string environment;
  std::vector<double> latencies_ms;  // timed iterations only; not serialized
};

using BenchClock = std::function<std::chrono::nanoseconds()>;

// Monotonic wall clock (steady_clock).
BenchClock steady_bench_clock();

std::string bench_environment();

// Nearest-rank percentile of an unsorted sample, p in (0, 100].
double percentile(std::vector<double> values, double p);

BenchReport measure_fps(const Model<float>& model, const std::string& name, const BenchOptions& opts,
                        const BenchClock& clock = steady_bench_clock());

struct NamedConfig {
  std::string name;
  ModelConfig config;
};

// One report per config, sorted by fps, fastest first.
std::vector<BenchReport> compare_models(const std::vector<NamedConfig>& configs, const BenchOptions& opts);

void write_bench_csv(std::ostream& out, const std::vector<BenchReport>& reports);
std::vector<BenchReport> read_bench_csv(std::istream& in);
std::string format_bench_table(const std::vector<BenchReport>& reports);

}  // namespace davit

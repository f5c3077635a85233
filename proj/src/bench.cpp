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

#include "davit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "davit/error.hpp"
#include "davit/kernels.hpp"

namespace davit {

BenchClock steady_bench_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch());
  };
}

std::string bench_environment() {
  std::ostringstream os;
  os << "cpu threads=" << kernels::max_threads() << " backend=" << kernels::backend_name(kernels::backend());
#if defined(__clang__)
  os << " compiler=clang-" << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  os << " compiler=gcc-" << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
  return os.str();
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of an empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw Error("percentile rank must lie in (0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * double(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

namespace {

BenchReport measure_once(const Model<float>& model, const std::string& name, const BenchOptions& opts,
                         const Tensorf& input, const BenchClock& clock) {
  for (std::size_t i = 0; i < opts.warmup_iters; ++i) (void)forward(input, model);
  BenchReport r;
  r.model_name = name;
  r.param_count = count_params(model);
  r.batch_size = opts.batch_size;
  r.warmup_iters = opts.warmup_iters;
  r.timed_iters = opts.timed_iters;
  r.environment = bench_environment();
  r.latencies_ms.reserve(opts.timed_iters);
  const auto start = clock();
  for (std::size_t i = 0; i < opts.timed_iters; ++i) {
    const auto t0 = clock();
    (void)forward(input, model);
    const auto t1 = clock();
    r.latencies_ms.push_back(double((t1 - t0).count()) / 1e6);
  }
  const auto stop = clock();
  r.elapsed_s = double((stop - start).count()) / 1e9;
  if (!(r.elapsed_s > 0.0)) throw Error("benchmark clock did not advance");
  r.fps = double(opts.batch_size * opts.timed_iters) / r.elapsed_s;
  r.lat_mean_ms = std::accumulate(r.latencies_ms.begin(), r.latencies_ms.end(), 0.0) / double(r.latencies_ms.size());
  r.lat_p50_ms = percentile(r.latencies_ms, 50.0);
  r.lat_p95_ms = percentile(r.latencies_ms, 95.0);
  return r;
}

}  // namespace

BenchReport measure_fps(const Model<float>& model, const std::string& name, const BenchOptions& opts,
                        const BenchClock& clock) {
  if (opts.timed_iters < 1) throw ConfigError("bench: timed_iters must be >= 1");
  if (opts.batch_size < 1) throw ConfigError("bench: batch_size must be >= 1");
  if (opts.runs < 1) throw ConfigError("bench: runs must be >= 1");
  if (Tape<float>::active()) throw Error("bench: refusing to time inference while a gradient tape is recording");
  const auto& cfg = model.config;
  const Tensorf input = Tensorf::create({opts.batch_size, cfg.input_channels, cfg.input_size, cfg.input_size},
                                        TruncatedNormalFill{0.5, 0.25, opts.seed});
  std::vector<BenchReport> runs;
  for (std::size_t i = 0; i < opts.runs; ++i) runs.push_back(measure_once(model, name, opts, input, clock));
  std::sort(runs.begin(), runs.end(), [](const BenchReport& a, const BenchReport& b) { return a.fps < b.fps; });
  return runs[(runs.size() - 1) / 2];
}

std::vector<BenchReport> compare_models(const std::vector<NamedConfig>& configs, const BenchOptions& opts) {
  if (configs.empty()) throw ConfigError("bench: at least one model config is required");
  std::vector<BenchReport> out;
  for (const auto& nc : configs) {
    const auto model = build_model<float>(nc.config, opts.seed);
    out.push_back(measure_fps(model, nc.name, opts));
  }
  std::stable_sort(out.begin(), out.end(), [](const BenchReport& a, const BenchReport& b) { return a.fps > b.fps; });
  return out;
}

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw Error("bench csv: unterminated quote");
  out.push_back(field);
  return out;
}

constexpr const char* kHeader = "model_name,param_count,batch_size,fps,lat_mean_ms,lat_p50_ms,lat_p95_ms,environment";

}  // namespace

void write_bench_csv(std::ostream& out, const std::vector<BenchReport>& reports) {
  out << kHeader << '\n';
  for (const auto& r : reports) {
    out << quote(r.model_name) << ',' << r.param_count << ',' << r.batch_size << ',' << g17(r.fps) << ','
        << g17(r.lat_mean_ms) << ',' << g17(r.lat_p50_ms) << ',' << g17(r.lat_p95_ms) << ',' << quote(r.environment)
        << '\n';
  }
}

std::vector<BenchReport> read_bench_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw Error("bench csv: unexpected header");
  std::vector<BenchReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_row(line);
    if (f.size() != 8) throw Error("bench csv: expected 8 fields, got " + std::to_string(f.size()));
    BenchReport r;
    try {
      r.model_name = f[0];
      r.param_count = std::stoull(f[1]);
      r.batch_size = std::stoull(f[2]);
      r.fps = std::stod(f[3]);
      r.lat_mean_ms = std::stod(f[4]);
      r.lat_p50_ms = std::stod(f[5]);
      r.lat_p95_ms = std::stod(f[6]);
    } catch (const std::exception&) {
      throw Error("bench csv: malformed number in row '" + line + "'");
    }
    r.environment = f[7];
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_bench_table(const std::vector<BenchReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(20) << "model" << std::right << std::setw(12) << "params" << std::setw(7) << "batch"
     << std::setw(12) << "fps" << std::setw(11) << "mean ms" << std::setw(11) << "p50 ms" << std::setw(11)
     << "p95 ms" << '\n';
  os << std::fixed;
  for (const auto& r : reports) {
    os << std::left << std::setw(20) << r.model_name << std::right << std::setw(12) << r.param_count << std::setw(7)
       << r.batch_size << std::setw(12) << std::setprecision(2) << r.fps << std::setw(11) << std::setprecision(3)
       << r.lat_mean_ms << std::setw(11) << r.lat_p50_ms << std::setw(11) << r.lat_p95_ms << '\n';
  }
  if (!reports.empty()) os << "environment: " << reports.front().environment << '\n';
  return os.str();
}

}  // namespace davit

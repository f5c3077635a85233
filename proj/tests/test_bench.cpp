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

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "davit/bench.hpp"
#include "davit/error.hpp"

using namespace davit;

namespace {

// Advances by a fixed step on every read and counts reads.
struct FakeClock {
  std::int64_t now_ns = 0, step_ns = 1'000'000;
  std::size_t reads = 0;
  BenchClock fn() {
    return [this] {
      ++reads;
      now_ns += step_ns;
      return std::chrono::nanoseconds(now_ns);
    };
  }
};

BenchOptions tiny(std::size_t batch, std::size_t warmup, std::size_t iters) {
  BenchOptions o;
  o.batch_size = batch;
  o.warmup_iters = warmup;
  o.timed_iters = iters;
  return o;
}

BenchReport sample_report(const std::string& name, double fps) {
  BenchReport r;
  r.model_name = name;
  r.param_count = 35226;
  r.batch_size = 4;
  r.fps = fps;
  r.lat_mean_ms = 0.1 + 0.2;
  r.lat_p50_ms = 1.0 / 3.0;
  r.lat_p95_ms = 2.5e-7;
  r.environment = "cpu threads=1, \"quoted\"";
  return r;
}

}  // namespace

TEST(Bench, FpsIdentityUnderFakeClock) {
  const auto m = build_model<float>(ModelConfig::toy(), 1);
  FakeClock clock;
  const auto r = measure_fps(m, "toy", tiny(3, 2, 5), clock.fn());
  // one start read, two per iteration, one stop read
  EXPECT_DOUBLE_EQ(r.elapsed_s, 11e-3);
  EXPECT_DOUBLE_EQ(r.fps * r.elapsed_s, 3.0 * 5.0);
  ASSERT_EQ(r.latencies_ms.size(), 5u);
  for (double l : r.latencies_ms) EXPECT_DOUBLE_EQ(l, 1.0);
  EXPECT_DOUBLE_EQ(r.lat_mean_ms, 1.0);
  EXPECT_EQ(r.param_count, count_params(m));
}

TEST(Bench, WarmupIsNotTimed) {
  const auto m = build_model<float>(ModelConfig::toy(), 1);
  FakeClock a, b;
  const auto ra = measure_fps(m, "toy", tiny(1, 0, 4), a.fn());
  const auto rb = measure_fps(m, "toy", tiny(1, 6, 4), b.fn());
  EXPECT_EQ(a.reads, b.reads);
  EXPECT_EQ(ra.elapsed_s, rb.elapsed_s);
  EXPECT_EQ(rb.warmup_iters, 6u);
}

TEST(Bench, MedianRunIsReported) {
  const auto m = build_model<float>(ModelConfig::toy(), 1);
  auto opts = tiny(1, 0, 2);
  opts.runs = 3;
  std::vector<std::int64_t> steps{3'000'000, 1'000'000, 2'000'000};
  std::size_t reads = 0;
  std::int64_t now = 0;
  BenchClock fn = [&] {
    now += steps[reads++ / 6];  // six reads per run
    return std::chrono::nanoseconds(now);
  };
  const auto r = measure_fps(m, "toy", opts, fn);
  EXPECT_DOUBLE_EQ(r.elapsed_s, 5 * 2e-3);
}

TEST(Bench, RejectsRecordingTapeAndBadOptions) {
  const auto m = build_model<float>(ModelConfig::toy(), 1);
  {
    Tape<float> tape;
    EXPECT_THROW(measure_fps(m, "toy", tiny(1, 0, 1)), Error);
  }
  EXPECT_THROW(measure_fps(m, "toy", tiny(0, 0, 1)), ConfigError);
  EXPECT_THROW(measure_fps(m, "toy", tiny(1, 0, 0)), ConfigError);
  FakeClock frozen;
  frozen.step_ns = 0;
  EXPECT_THROW(measure_fps(m, "toy", tiny(1, 0, 1), frozen.fn()), Error);
}

TEST(Percentile, NearestRank) {
  const std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_EQ(percentile(v, 50), 3);
  EXPECT_EQ(percentile(v, 100), 5);
  EXPECT_EQ(percentile(v, 1), 1);
  EXPECT_EQ(percentile(v, 95), 5);
  EXPECT_EQ(percentile({7.0}, 50), 7.0);
  EXPECT_THROW(percentile({}, 50), Error);
  EXPECT_THROW(percentile(v, 0), Error);
  EXPECT_THROW(percentile(v, 101), Error);
}

TEST(Percentile, MonotoneInRank) {
  std::vector<double> v;
  for (int i = 0; i < 37; ++i) v.push_back(double((i * 17) % 37));
  double prev = -1;
  for (double p = 1; p <= 100; p += 1) {
    const double q = percentile(v, p);
    EXPECT_GE(q, prev);
    prev = q;
  }
  EXPECT_LE(percentile(v, 50), percentile(v, 95));
}

TEST(BenchCsv, RoundTripIsLossless) {
  const std::vector<BenchReport> in{sample_report("toy", 1234.5678901234567), sample_report("wide, \"2x\"", 1e-3)};
  std::stringstream ss;
  write_bench_csv(ss, in);
  const auto out = read_bench_csv(ss);
  ASSERT_EQ(out.size(), in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    EXPECT_EQ(out[i].model_name, in[i].model_name);
    EXPECT_EQ(out[i].param_count, in[i].param_count);
    EXPECT_EQ(out[i].batch_size, in[i].batch_size);
    EXPECT_EQ(out[i].fps, in[i].fps);
    EXPECT_EQ(out[i].lat_mean_ms, in[i].lat_mean_ms);
    EXPECT_EQ(out[i].lat_p50_ms, in[i].lat_p50_ms);
    EXPECT_EQ(out[i].lat_p95_ms, in[i].lat_p95_ms);
    EXPECT_EQ(out[i].environment, in[i].environment);
  }
}

TEST(BenchCsv, RejectsMalformedInput) {
  std::istringstream no_header("x,y\n");
  EXPECT_THROW(read_bench_csv(no_header), Error);
  std::stringstream ss;
  write_bench_csv(ss, {});
  ss << "\"toy\",1,2\n";
  EXPECT_THROW(read_bench_csv(ss), Error);
  std::stringstream bad_num;
  write_bench_csv(bad_num, {});
  bad_num << "\"toy\",abc,1,1,1,1,1,\"e\"\n";
  EXPECT_THROW(read_bench_csv(bad_num), Error);
  std::stringstream open_quote;
  write_bench_csv(open_quote, {});
  open_quote << "\"toy,1,1,1,1,1,1,e\n";
  EXPECT_THROW(read_bench_csv(open_quote), Error);
}

TEST(Compare, SortedFastestFirstWithParamCounts) {
  auto wide = ModelConfig::toy();
  for (auto& s : wide.stages) s.channels *= 2;
  auto opts = tiny(1, 1, 3);
  const auto reports = compare_models({{"toy", ModelConfig::toy()}, {"wide", wide}}, opts);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_GE(reports[0].fps, reports[1].fps);
  for (const auto& r : reports) {
    const auto& cfg = r.model_name == "toy" ? ModelConfig::toy() : wide;
    EXPECT_EQ(r.param_count, count_params(build_model<float>(cfg, 0)));
  }
  EXPECT_THROW(compare_models({}, opts), ConfigError);
}

TEST(Compare, SingleConfigTable) {
  const auto reports = compare_models({{"toy", ModelConfig::toy()}}, tiny(1, 0, 2));
  ASSERT_EQ(reports.size(), 1u);
  const auto table = format_bench_table(reports);
  EXPECT_NE(table.find("toy"), std::string::npos);
  EXPECT_NE(table.find("environment:"), std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
}

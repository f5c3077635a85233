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

// Serial reference kernels vs the OpenMP backend, plus a whole-model forward
// pass under each backend. Run with --benchmark_filter to pick a family.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "davit/kernels.hpp"
#include "davit/model.hpp"

namespace k = davit::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

k::Backend backend_arg(const benchmark::State& st) {
  return st.range(0) == 0 ? k::Backend::Reference : k::Backend::Parallel;
}

void BM_Gemm(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(1));
  k::GemmShape s;
  s.m = s.n = s.k = n;
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  k::BackendGuard guard(backend_arg(st));
  for (auto _ : st) {
    k::gemm(s, a.data(), b.data(), c.data(), false);
    benchmark::DoNotOptimize(c.data());
  }
  st.SetItemsProcessed(st.iterations() * 2 * n * n * n);
  st.SetLabel(k::backend_name(k::backend()));
}

void BM_Conv2d(benchmark::State& st) {
  k::ConvGeometry g;
  g.batch = 8;
  g.in_channels = 3;
  g.in_h = g.in_w = static_cast<std::size_t>(st.range(1));
  g.out_channels = 64;
  g.kernel = 7;
  g.stride = 4;
  g.pad_top = g.pad_left = g.pad_bottom = g.pad_right = 3;
  const auto x = random_vec(g.batch * g.in_channels * g.in_h * g.in_w, 3);
  const auto w = random_vec(g.out_channels * g.in_channels * g.kernel * g.kernel, 4);
  std::vector<float> y(g.batch * g.out_channels * g.out_h() * g.out_w());
  k::BackendGuard guard(backend_arg(st));
  for (auto _ : st) {
    k::conv2d_forward(g, x.data(), w.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetLabel(k::backend_name(k::backend()));
}

void BM_Softmax(benchmark::State& st) {
  const auto rows = static_cast<std::size_t>(st.range(1)), n = std::size_t{49};
  const auto x = random_vec(rows * n, 5);
  std::vector<float> y(rows * n);
  k::BackendGuard guard(backend_arg(st));
  for (auto _ : st) {
    k::softmax(rows, n, 1, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetLabel(k::backend_name(k::backend()));
}

void BM_LayerNorm(benchmark::State& st) {
  const auto rows = static_cast<std::size_t>(st.range(1)), c = std::size_t{96};
  const auto x = random_vec(rows * c, 6);
  const std::vector<float> gamma(c, 1.0f), beta(c, 0.0f);
  std::vector<float> y(rows * c), mean(rows), rstd(rows);
  k::BackendGuard guard(backend_arg(st));
  for (auto _ : st) {
    k::layer_norm(rows, c, x.data(), gamma.data(), beta.data(), 1e-5, y.data(), mean.data(), rstd.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetLabel(k::backend_name(k::backend()));
}

void BM_ToyForward(benchmark::State& st) {
  const auto cfg = davit::ModelConfig::toy();
  const auto model = davit::build_model<float>(cfg, 0);
  const auto batch = static_cast<std::size_t>(st.range(1));
  const auto input = davit::Tensorf::create({batch, cfg.input_channels, cfg.input_size, cfg.input_size},
                                            davit::TruncatedNormalFill{0.0, 1.0, 7});
  k::BackendGuard guard(backend_arg(st));
  for (auto _ : st) benchmark::DoNotOptimize(davit::forward(input, model));
  st.SetItemsProcessed(st.iterations() * batch);
  st.SetLabel(k::backend_name(k::backend()));
}

}  // namespace

BENCHMARK(BM_Gemm)->ArgsProduct({{0, 1}, {64, 128, 256}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Conv2d)->ArgsProduct({{0, 1}, {64, 224}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Softmax)->ArgsProduct({{0, 1}, {1024, 16384}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LayerNorm)->ArgsProduct({{0, 1}, {1024, 16384}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ToyForward)->ArgsProduct({{0, 1}, {1, 16}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

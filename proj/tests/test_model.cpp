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

#include <cmath>
#include <map>
#include <set>

#include "davit/error.hpp"
#include "davit/model.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace davit;
namespace dt = davit::testing;

TEST(ModelConfig, BaseStageSizes) {
  const auto cfg = ModelConfig::base();
  EXPECT_EQ(cfg.input_size, 300u);
  EXPECT_EQ(cfg.stage_sizes(), (std::vector<std::size_t>{75, 38, 19, 10}));
  const std::vector<std::size_t> widths{96, 192, 384, 768};
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(cfg.stages[s].channels, widths[s]);
    EXPECT_EQ(cfg.stages[s].depth, 1u);
    EXPECT_EQ(cfg.stages[s].window_size, 7u);
    EXPECT_EQ(cfg.stages[s].head_width, 32u);
  }
}

TEST(PatchEmbed, OutputExtents) {
  StageConfig first;  // k7 s4 p3
  EXPECT_EQ(embed_output_size(300, first), 75u);
  StageConfig later;
  later.embed_kernel = 2;
  later.embed_stride = 2;
  later.embed_pad = 0;
  later.ceil_pad = true;
  EXPECT_EQ(embed_output_size(75, later), 38u);
  EXPECT_EQ(embed_output_size(38, later), 19u);
  EXPECT_EQ(embed_output_size(19, later), 10u);
  const auto pad = embed_padding(19, later);
  EXPECT_EQ(pad.top, 0u);
  EXPECT_EQ(pad.left, 0u);
  EXPECT_EQ(pad.bottom, 1u);
  EXPECT_EQ(pad.right, 1u);
  EXPECT_EQ(embed_padding(38, later).bottom, 0u);
}

TEST(ModelConfig, ValidationErrors) {
  auto cfg = ModelConfig::toy();
  cfg.stages[0].head_width = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig::toy();
  cfg.stages[1].depth = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig::toy();
  cfg.input_size = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig::toy();
  cfg.stages.clear();
  EXPECT_THROW(build_model<float>(cfg, 1), ConfigError);
}

TEST(ModelConfig, HashTracksArchitecture) {
  auto a = ModelConfig::toy();
  auto b = ModelConfig::toy();
  EXPECT_EQ(a.hash(), b.hash());
  b.stages[1].channels = 64;
  EXPECT_NE(a.hash(), b.hash());
  b = ModelConfig::toy();
  b.channel_scale = ChannelScale::Spatial;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(Model, ParameterCountMatchesClosedForm) {
  for (const auto& cfg : {ModelConfig::toy(), ModelConfig::base()}) {
    auto m = build_model<float>(cfg, 1);
    EXPECT_EQ(count_params(m), count_params(cfg));
  }
  EXPECT_LE(count_params(ModelConfig::toy()), 50000u);
}

TEST(Model, BaseParameterCountIsAboutTwentyMillion) {
  // one dual block per stage
  const std::size_t n = count_params(ModelConfig::base());
  EXPECT_GT(n, 20'000'000u);
  EXPECT_LT(n, 21'000'000u);
}

TEST(Model, NamedParametersAreUniqueAndFinite) {
  auto m = build_model<float>(ModelConfig::toy(), 3);
  std::set<std::string> names;
  std::size_t total = 0;
  for (const auto& [name, t] : m.named_parameters()) {
    EXPECT_TRUE(names.insert(name).second) << name;
    for (float v : t.data()) ASSERT_TRUE(std::isfinite(v)) << name;
    total += t.numel();
  }
  EXPECT_EQ(total, count_params(m));
  EXPECT_TRUE(names.count("stages.0.blocks.0.spatial_attn.qkv.weight"));
  EXPECT_TRUE(names.count("head.fc.weight"));
}

TEST(Model, SameSeedIsBitwiseIdentical) {
  auto a = build_model<float>(ModelConfig::toy(), 11);
  auto b = build_model<float>(ModelConfig::toy(), 11);
  auto c = build_model<float>(ModelConfig::toy(), 12);
  auto pa = a.named_parameters(), pb = b.named_parameters(), pc = c.named_parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto da = pa[i].second.data(), db = pb[i].second.data(), dc = pc[i].second.data();
    EXPECT_TRUE(std::equal(da.begin(), da.end(), db.begin())) << pa[i].first;
    any_diff |= !std::equal(da.begin(), da.end(), dc.begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, ToyForwardIsFiniteWithStageTrace) {
  auto m = build_model<float>(ModelConfig::toy(), 1);
  Tensorf images = Tensorf::create({3, 3, 32, 32}, TruncatedNormalFill{0.5, 0.2, 4});
  ForwardTrace trace;
  auto logits = forward(images, m, &trace);
  EXPECT_EQ(logits.shape(), (Shape{3, 10}));
  for (float v : logits.data()) EXPECT_TRUE(std::isfinite(v));
  ASSERT_EQ(trace.stage_outputs.size(), 2u);
  EXPECT_EQ(trace.stage_outputs[0], (Shape{3, 8, 8, 16}));
  EXPECT_EQ(trace.stage_outputs[1], (Shape{3, 4, 4, 32}));
}

TEST(Model, NarrowToyForwardIsFinite) {
  auto cfg = ModelConfig::toy();
  cfg.stages[0].channels = 8;
  cfg.stages[1].channels = 16;
  for (auto& s : cfg.stages) s.head_width = 4;
  auto m = build_model<float>(cfg, 2);
  const auto logits = forward(Tensorf::create({2, 3, 32, 32}, TruncatedNormalFill{0.5, 0.2, 5}), m);
  EXPECT_EQ(logits.shape(), (Shape{2, 10}));
  for (float v : logits.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_LT(count_params(m), count_params(build_model<float>(ModelConfig::toy(), 2)));
}

TEST(Model, BaseForwardBatchTwo) {
  auto m = build_model<float>(ModelConfig::base(), 1);
  Tensorf images = Tensorf::create({2, 3, 300, 300}, TruncatedNormalFill{0.5, 0.2, 5});
  ForwardTrace trace;
  auto logits = forward(images, m, &trace);
  EXPECT_EQ(logits.shape(), (Shape{2, 10}));
  const std::vector<std::size_t> sizes{75, 38, 19, 10};
  for (std::size_t s = 0; s < 4; ++s) EXPECT_EQ(trace.stage_outputs[s][1], sizes[s]);
}

TEST(Model, RejectsWrongInput) {
  auto m = build_model<float>(ModelConfig::toy(), 1);
  EXPECT_THROW(forward(Tensorf({1, 3, 31, 31}), m), ShapeError);
  EXPECT_THROW(forward(Tensorf({1, 1, 32, 32}), m), ShapeError);
}

TEST(Model, IdenticalImagesGiveIdenticalRows) {
  auto m = build_model<float>(ModelConfig::toy(), 2);
  Tensorf one = Tensorf::create({1, 3, 32, 32}, TruncatedNormalFill{0.5, 0.2, 6});
  Tensorf two({2, 3, 32, 32});
  for (std::size_t i = 0; i < one.numel(); ++i) two[i] = two[one.numel() + i] = one[i];
  auto logits = forward(two, m);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(logits[k], logits[10 + k]);
}

TEST(Model, SoftmaxOfLogitsSumsToOne) {
  auto m = build_model<float>(ModelConfig::toy(), 2);
  auto logits = forward(Tensorf::create({4, 3, 32, 32}, TruncatedNormalFill{0.5, 0.2, 7}), m);
  auto probs = ops::softmax(logits, 1);
  for (std::size_t b = 0; b < 4; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < 10; ++k) s += probs[b * 10 + k];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(DualBlock, ZeroOutputProjectionsGiveIdentity) {
  auto cfg = ModelConfig::toy();
  auto m = build_model<double>(cfg, 4);
  for (auto& [name, t] : m.named_parameters()) {
    const bool out_proj = name.find("proj.") != std::string::npos || name.find("fc2.") != std::string::npos;
    if (out_proj) std::fill(t.data().begin(), t.data().end(), 0.0);
  }
  auto x = dt::random_tensor({1, 6, 6, 16}, 8);
  auto y = dual_attention_block(x, m.stages[0].blocks[0], cfg.stages[0]);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(DualBlock, PreservesShape) {
  StageConfig s;
  s.channels = 8;
  s.window_size = 4;
  s.head_width = 4;
  ModelConfig cfg;
  cfg.input_size = 8;
  cfg.stages = {s};
  cfg.stages[0].embed_kernel = 2;
  cfg.stages[0].embed_stride = 2;
  cfg.stages[0].embed_pad = 0;
  auto m = build_model<float>(cfg, 1);
  auto y = dual_attention_block(Tensorf({1, 6, 6, 8}), m.stages[0].blocks[0], s);
  EXPECT_EQ(y.shape(), (Shape{1, 6, 6, 8}));
  EXPECT_THROW(dual_attention_block(Tensorf({1, 6, 6, 4}), m.stages[0].blocks[0], s), ShapeError);
}

namespace {

void expect_matches_straight_line(const ModelConfig& cfg, std::uint64_t seed) {
  auto m = build_model<double>(cfg, seed);
  // Spread the weights out so attention maps are far from uniform.
  std::uint64_t s = seed * 1000;
  std::map<std::string, std::vector<double>> named;
  for (auto& [name, t] : m.named_parameters()) {
    if (name.find("norm") == std::string::npos) {
      auto r = dt::random_tensor(t.shape(), s++, -0.3, 0.3);
      std::copy(r.data().begin(), r.data().end(), t.data().begin());
    }
    named[name] = {t.data().begin(), t.data().end()};
  }
  const std::size_t batch = 2;
  auto images = dt::random_tensor({batch, cfg.input_channels, cfg.input_size, cfg.input_size}, seed + 7, 0.0, 1.0);
  auto logits = forward(images, m);
  const auto want = dt::straight_line_forward({images.data().begin(), images.data().end()}, batch, cfg, named);
  ASSERT_EQ(logits.numel(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_LT(std::abs(logits[i] - want[i]) / std::max(std::abs(want[i]), 1e-9), 1e-6) << "logit " << i;
  }
}

}  // namespace

TEST(Model, ToyForwardMatchesStraightLineImplementation) { expect_matches_straight_line(ModelConfig::toy(), 21); }

TEST(Model, PaddedWindowsMatchStraightLineImplementation) {
  // 30 -> 8 (k4 s4 p1) -> 4 (ceil) with window 3: both stages need padded windows.
  auto cfg = ModelConfig::toy();
  cfg.input_size = 30;
  cfg.stages[0].embed_pad = 1;
  cfg.stages[0].window_size = 3;
  cfg.stages[1].window_size = 3;
  cfg.stages[1].depth = 2;
  cfg.channel_scale = ChannelScale::Spatial;
  ASSERT_EQ(cfg.stage_sizes(), (std::vector<std::size_t>{8, 4}));
  expect_matches_straight_line(cfg, 22);
}

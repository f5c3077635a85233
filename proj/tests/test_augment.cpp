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
#include <random>

#include "davit/augment.hpp"
#include "davit/error.hpp"

using namespace davit;

namespace {

Sample random_sample(std::size_t size, std::uint64_t seed) {
  Sample s;
  s.image = Image::blank(size, size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& p : s.image.pixels) p = u(rng);
  s.label = {0.0, 1.0, 0.0};
  s.class_index = 1;
  s.weight = 2.0;
  s.tag = "hard";
  return s;
}

AugmentPolicy single(AugmentOp op, double p, double m) { return AugmentPolicy{{AugmentStep{op, p, m}}}; }

const AugmentOp kAllOps[] = {AugmentOp::ScaleCrop,  AugmentOp::HFlip,    AugmentOp::Hue,
                             AugmentOp::Saturation, AugmentOp::Exposure, AugmentOp::Brightness};

double magnitude_for(AugmentOp op) {
  switch (op) {
    case AugmentOp::ScaleCrop: return 1.7;
    case AugmentOp::HFlip: return 0.0;
    case AugmentOp::Hue: return 40.0;
    case AugmentOp::Saturation: return 1.8;
    case AugmentOp::Exposure: return 1.4;
    case AugmentOp::Brightness: return -0.2;
  }
  return 0.0;
}

}  // namespace

TEST(Augment, ZeroProbabilityIsIdentity) {
  const Sample s = random_sample(8, 1);
  AugmentPolicy p;
  for (auto op : kAllOps) p.steps.push_back({op, 0.0, magnitude_for(op)});
  const Sample out = apply_policy(s, p, 42);
  EXPECT_EQ(out.image.pixels, s.image.pixels);
}

TEST(Augment, HFlipTwiceIsIdentity) {
  const Sample s = random_sample(7, 2);
  const auto p = single(AugmentOp::HFlip, 1.0, 0.0);
  const Sample once = apply_policy(s, p, 1);
  EXPECT_NE(once.image.pixels, s.image.pixels);
  EXPECT_EQ(once.image.at(0, 3, 0), s.image.at(0, 3, 6));
  EXPECT_EQ(apply_policy(once, p, 2).image.pixels, s.image.pixels);
}

TEST(Augment, BrightnessOnConstantImage) {
  Sample s = random_sample(4, 3);
  std::fill(s.image.pixels.begin(), s.image.pixels.end(), 0.5f);
  const Sample out = apply_policy(s, single(AugmentOp::Brightness, 1.0, 0.1), 0);
  for (float v : out.image.pixels) EXPECT_FLOAT_EQ(v, 0.6f);
}

TEST(Augment, ExposureScalesThenClamps) {
  Sample s = random_sample(2, 4);
  s.image.pixels.assign(12, 0.3f);
  s.image.pixels[0] = 0.9f;
  const Sample out = apply_policy(s, single(AugmentOp::Exposure, 1.0, 2.0), 0);
  EXPECT_FLOAT_EQ(out.image.pixels[1], 0.6f);
  EXPECT_EQ(out.image.pixels[0], 1.0f);
}

TEST(Augment, UnitZoomScaleCropIsIdentity) {
  const Sample s = random_sample(9, 5);
  const Sample out = apply_policy(s, single(AugmentOp::ScaleCrop, 1.0, 1.0), 3);
  for (std::size_t i = 0; i < s.image.pixels.size(); ++i) EXPECT_NEAR(out.image.pixels[i], s.image.pixels[i], 1e-6);
}

TEST(Augment, EveryOpPreservesShapeRangeLabelAndIsDeterministic) {
  const Sample s = random_sample(12, 6);
  for (auto op : kAllOps) {
    const auto p = single(op, 1.0, magnitude_for(op));
    const Sample a = apply_policy(s, p, 77), b = apply_policy(s, p, 77);
    EXPECT_EQ(a.image.width, 12u) << augment_op_name(op);
    EXPECT_EQ(a.image.height, 12u);
    EXPECT_EQ(a.image.pixels.size(), s.image.pixels.size());
    EXPECT_EQ(a.image.pixels, b.image.pixels) << augment_op_name(op);
    EXPECT_EQ(a.label, s.label);
    EXPECT_EQ(a.weight, s.weight);
    EXPECT_EQ(a.tag, s.tag);
    for (float v : a.image.pixels) ASSERT_TRUE(v >= 0.0f && v <= 1.0f) << augment_op_name(op);
  }
}

TEST(Augment, DrawCountIndependentOfFiring) {
  // A step that never fires must leave later steps' draws untouched.
  const Sample s = random_sample(10, 7);
  AugmentPolicy with_dead{{{AugmentOp::Hue, 0.0, 30.0}, {AugmentOp::ScaleCrop, 1.0, 2.0}}};
  AugmentPolicy with_live{{{AugmentOp::Hue, 1.0, 0.0}, {AugmentOp::ScaleCrop, 1.0, 2.0}}};
  const Sample a = apply_policy(s, with_dead, 5), b = apply_policy(s, with_live, 5);
  for (std::size_t i = 0; i < a.image.pixels.size(); ++i) EXPECT_NEAR(a.image.pixels[i], b.image.pixels[i], 1e-5);
}

TEST(Augment, FiringRateMatchesProbability) {
  const Sample s = random_sample(3, 8);
  const auto p = single(AugmentOp::HFlip, 0.3, 0.0);
  const int n = 4000;
  int fired = 0;
  for (int i = 0; i < n; ++i) fired += apply_policy(s, p, std::uint64_t(i)).image.pixels != s.image.pixels;
  EXPECT_NEAR(double(fired), 0.3 * n, 3.0 * std::sqrt(n * 0.3 * 0.7));
}

TEST(Hsv, RoundTripAndKnownColours) {
  float h, sat, v;
  rgb_to_hsv(1.0f, 0.0f, 0.0f, h, sat, v);
  EXPECT_FLOAT_EQ(h, 0.0f);
  EXPECT_FLOAT_EQ(sat, 1.0f);
  rgb_to_hsv(0.0f, 0.0f, 1.0f, h, sat, v);
  EXPECT_FLOAT_EQ(h, 240.0f);
  rgb_to_hsv(0.4f, 0.4f, 0.4f, h, sat, v);
  EXPECT_FLOAT_EQ(sat, 0.0f);
  EXPECT_FLOAT_EQ(v, 0.4f);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int i = 0; i < 500; ++i) {
    const float r = u(rng), g = u(rng), b = u(rng);
    float r2, g2, b2;
    rgb_to_hsv(r, g, b, h, sat, v);
    hsv_to_rgb(h, sat, v, r2, g2, b2);
    EXPECT_NEAR(r2, r, 1e-5);
    EXPECT_NEAR(g2, g, 1e-5);
    EXPECT_NEAR(b2, b, 1e-5);
  }
}

TEST(Hsv, FullTurnHueShiftIsIdentity) {
  const Sample s = random_sample(6, 10);
  const Sample out = apply_policy(s, single(AugmentOp::Hue, 1.0, 180.0), 0);
  const Sample back = apply_policy(out, single(AugmentOp::Hue, 1.0, -180.0), 0);
  for (std::size_t i = 0; i < s.image.pixels.size(); ++i) EXPECT_NEAR(back.image.pixels[i], s.image.pixels[i], 1e-5);
}

TEST(Policy, ParsesFileFormat) {
  const auto p = AugmentPolicy::parse("# header\nscale_crop 0.5 1.3\n\nhflip 0.5 0   # trailing\nhue 0.3 15\n");
  ASSERT_EQ(p.steps.size(), 3u);
  EXPECT_EQ(p.steps[0].op, AugmentOp::ScaleCrop);
  EXPECT_EQ(p.steps[0].probability, 0.5);
  EXPECT_EQ(p.steps[0].magnitude, 1.3);
  EXPECT_EQ(p.steps[2].op, AugmentOp::Hue);
}

TEST(Policy, RejectsBadLinesAndRanges) {
  EXPECT_THROW(AugmentPolicy::parse("blur 0.5 1\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("hue 0.5\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("hue 0.5 10 extra\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("hue 1.5 10\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("hue 0.5 200\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("scale_crop 0.5 0.5\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("exposure 0.5 0\n"), ConfigError);
  EXPECT_THROW(AugmentPolicy::parse("brightness 0.5 -1.5\n"), ConfigError);
  const Sample s = random_sample(4, 11);
  EXPECT_THROW(apply_policy(s, single(AugmentOp::Saturation, 1.0, 5.0), 0), ConfigError);
}

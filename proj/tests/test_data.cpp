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
#include <fstream>
#include <map>
#include <set>

#include "davit/dataset.hpp"
#include "davit/error.hpp"
#include "davit/image.hpp"
#include "scratch.hpp"

using namespace davit;
using davit::testing::ScratchDir;

namespace {

Sample make_sample(std::size_t size, std::size_t classes, std::size_t cls, float fill, const std::string& tag = "") {
  Sample s;
  s.image = Image::blank(size, size, fill);
  s.label.assign(classes, 0.0);
  s.label[cls] = 1.0;
  s.class_index = cls;
  s.tag = tag;
  return s;
}

Dataset make_dataset(std::size_t n, std::size_t tagged = 0) {
  Dataset ds;
  ds.class_names = {"a", "b"};
  ds.image_size = 2;
  for (std::size_t i = 0; i < n; ++i) {
    auto s = make_sample(2, 2, i % 2, float(i) / float(n), i < tagged ? "hard" : "");
    s.path = "img" + std::to_string(i);
    ds.samples.push_back(s);
  }
  return ds;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Upper 0.1% points of the chi-square distribution (standard tables).
double chi2_critical_001(std::size_t df) {
  static const std::map<std::size_t, double> table{{1, 10.828}, {2, 13.816}, {3, 16.266}, {4, 18.467},
                                                   {9, 27.877}};
  return table.at(df);
}

}  // namespace

TEST(Ppm, RedPixelScalesToUnitRange) {
  ScratchDir dir;
  const std::string header = "P6\n1 1\n255\n";
  write_file(dir / "red.ppm", header + std::string("\xff\x00\x00", 3));
  const Image img = read_ppm(dir / "red.ppm");
  ASSERT_EQ(img.width, 1u);
  EXPECT_EQ(img.at(0, 0, 0), 1.0f);
  EXPECT_EQ(img.at(1, 0, 0), 0.0f);
  EXPECT_EQ(img.at(2, 0, 0), 0.0f);
}

TEST(Ppm, RejectsOtherFormats) {
  ScratchDir dir;
  write_file(dir / "p3.ppm", "P3\n1 1\n255\n255 0 0\n");
  write_file(dir / "deep.ppm", "P6\n1 1\n65535\n......");
  write_file(dir / "short.ppm", "P6\n2 2\n255\nabc");
  EXPECT_THROW(read_ppm(dir / "p3.ppm"), DataError);
  EXPECT_THROW(read_ppm(dir / "deep.ppm"), DataError);
  EXPECT_THROW(read_ppm(dir / "short.ppm"), DataError);
}

TEST(Ppm, WriteReadRoundTripOnByteGrid) {
  ScratchDir dir;
  Image img = Image::blank(3, 2);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = float(i * 13 % 256) / 255.0f;
  write_ppm(dir / "x.ppm", img);
  EXPECT_EQ(read_ppm(dir / "x.ppm").pixels, img.pixels);
}

TEST(Manifest, LoadsRowsInOrder) {
  ScratchDir dir;
  Image img = Image::blank(4, 4, 0.5f);
  for (const char* n : {"x.ppm", "y.ppm", "z.ppm"}) write_ppm(dir / n, img);
  write_file(dir / "m.csv", "relative_path,label_name,tag,weight\nz.ppm,cat\nx.ppm,dog,hard,2.5\ny.ppm,cat,,\n");
  const Dataset ds = load_dataset(dir / "m.csv");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.class_names, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(ds.samples[0].path, "z.ppm");
  EXPECT_EQ(ds.samples[1].path, "x.ppm");
  EXPECT_EQ(ds.samples[1].tag, "hard");
  EXPECT_EQ(ds.samples[1].weight, 2.5);
  EXPECT_EQ(ds.samples[1].label, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(ds.samples[2].weight, 1.0);
  EXPECT_EQ(ds.image_size, 4u);
}

TEST(Manifest, MissingFileNamesTheRow) {
  ScratchDir dir;
  write_ppm(dir / "x.ppm", Image::blank(4, 4));
  write_file(dir / "m.csv", "relative_path,label_name\nx.ppm,cat\ngone.ppm,cat\n");
  try {
    load_dataset(dir / "m.csv");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("gone.ppm"), std::string::npos) << msg;
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
  }
}

TEST(Manifest, RejectsMalformedRowsAndUnknownLabels) {
  ScratchDir dir;
  write_ppm(dir / "x.ppm", Image::blank(4, 4));
  write_file(dir / "bad_header.csv", "path,label\nx.ppm,cat\n");
  write_file(dir / "bad_row.csv", "relative_path,label_name\nx.ppm\n");
  write_file(dir / "bad_weight.csv", "relative_path,label_name,tag,weight\nx.ppm,cat,,0\n");
  write_file(dir / "label.csv", "relative_path,label_name\nx.ppm,cow\n");
  EXPECT_THROW(load_dataset(dir / "bad_header.csv"), DataError);
  EXPECT_THROW(load_dataset(dir / "bad_row.csv"), DataError);
  EXPECT_THROW(load_dataset(dir / "bad_weight.csv"), DataError);
  EXPECT_THROW(load_dataset(dir / "label.csv", {"cat", "dog"}), DataError);
  EXPECT_THROW(load_dataset(dir / "absent.csv"), DataError);
}

TEST(Split, UntaggedEightyTwenty) {
  const auto [train, val] = split_dataset(make_dataset(10), 0.8, 3, {"hard"});
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(val.size(), 2u);
}

TEST(Split, TaggedSamplesAlwaysValidate) {
  const auto [train, val] = split_dataset(make_dataset(10, 3), 0.8, 3, {"hard"});
  EXPECT_EQ(train.size(), 5u);  // floor(7 * 0.8)
  EXPECT_EQ(val.size(), 5u);
  std::size_t hard_in_val = 0;
  for (const auto& s : val.samples) hard_in_val += s.tag == "hard";
  EXPECT_EQ(hard_in_val, 3u);
  for (const auto& s : train.samples) EXPECT_NE(s.tag, "hard");
}

TEST(Split, PartitionsExactlyForManySeeds) {
  const Dataset ds = make_dataset(23, 4);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [train, val] = split_dataset(ds, 0.7, seed, {"hard"});
    ASSERT_EQ(train.size() + val.size(), ds.size());
    std::multiset<std::string> seen;
    for (const auto* part : {&train, &val}) {
      for (const auto& s : part->samples) seen.insert(s.path);
    }
    std::set<std::string> unique(seen.begin(), seen.end());
    EXPECT_EQ(unique.size(), ds.size());
    EXPECT_EQ(seen.size(), ds.size());
  }
  EXPECT_THROW(split_dataset(Dataset{}, 0.8, 0, {}), DataError);
  EXPECT_THROW(split_dataset(ds, 1.0, 0, {}), ConfigError);
}

TEST(Mixup, EndpointsAndMidpoint) {
  const Sample a = make_sample(2, 3, 0, 0.2f), b = make_sample(2, 3, 1, 0.8f);
  const Sample one = mixup(a, b, 1.0);
  EXPECT_EQ(one.image.pixels, a.image.pixels);
  EXPECT_EQ(one.label, a.label);
  const Sample zero = mixup(a, b, 0.0);
  EXPECT_EQ(zero.image.pixels, b.image.pixels);
  const Sample half = mixup(a, b, 0.5);
  EXPECT_EQ(half.label, (std::vector<double>{0.5, 0.5, 0.0}));
  EXPECT_THROW(mixup(a, b, 1.5), DataError);
  EXPECT_THROW(mixup(a, make_sample(3, 3, 0, 0.0f), 0.5), ShapeError);
}

TEST(Mixup, ConvexSymmetricAndNormalized) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    Sample a = make_sample(3, 4, trial % 4, 0.0f), b = make_sample(3, 4, (trial + 1) % 4, 0.0f);
    for (auto& p : a.image.pixels) p = u(rng);
    for (auto& p : b.image.pixels) p = u(rng);
    const double lambda = double(u(rng));
    const Sample ab = mixup(a, b, lambda), ba = mixup(b, a, 1.0 - lambda);
    EXPECT_EQ(ab.image.pixels, ba.image.pixels);
    EXPECT_EQ(ab.label, ba.label);
    double sum = 0.0;
    for (double v : ab.label) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (std::size_t i = 0; i < ab.image.pixels.size(); ++i) {
      EXPECT_GE(ab.image.pixels[i], std::min(a.image.pixels[i], b.image.pixels[i]));
      EXPECT_LE(ab.image.pixels[i], std::max(a.image.pixels[i], b.image.pixels[i]));
    }
  }
}

TEST(Mixup, LambdaDraws) {
  std::mt19937_64 rng(5);
  std::size_t ones = 0;
  for (int i = 0; i < 2000; ++i) {
    const double l = sample_mixup_lambda(0.0, rng);
    ASSERT_TRUE(l == 0.0 || l == 1.0);
    ones += l == 1.0;
  }
  // fair coin, 3 sigma = 3 * sqrt(2000 / 4)
  EXPECT_NEAR(double(ones), 1000.0, 3.0 * std::sqrt(500.0));
  double mean = 0.0;
  for (int i = 0; i < 4000; ++i) {
    const double l = sample_mixup_lambda(0.2, rng);
    ASSERT_GE(l, 0.0);
    ASSERT_LE(l, 1.0);
    mean += l / 4000.0;
  }
  // Beta(a, a) has mean 1/2 and variance 1 / (4 (2a + 1)).
  EXPECT_NEAR(mean, 0.5, 3.0 * std::sqrt(1.0 / (4.0 * 1.4) / 4000.0));
  EXPECT_THROW(sample_mixup_lambda(-1.0, rng), ConfigError);
}

TEST(Sampler, UniformWithinThreeSigma) {
  const Dataset ds = make_dataset(10);
  const std::size_t n = 10000;
  const auto idx = weighted_sampler(ds, n, 7);
  std::vector<std::size_t> counts(10);
  for (auto i : idx) counts.at(i)++;
  const double p = 0.1, sigma = std::sqrt(double(n) * p * (1 - p));
  for (auto c : counts) EXPECT_NEAR(double(c), double(n) * p, 3.0 * sigma);
}

TEST(Sampler, ThreeToOneWeights) {
  Dataset ds = make_dataset(2);
  ds.samples[0].weight = 3.0;
  const std::size_t n = 10000;
  const auto idx = weighted_sampler(ds, n, 9);
  std::size_t first = 0;
  for (auto i : idx) first += i == 0;
  const double sigma = std::sqrt(0.75 * 0.25 / double(n));
  EXPECT_NEAR(double(first) / double(n), 0.75, 3.0 * sigma);
}

TEST(Sampler, ChiSquareAgainstWeights) {
  for (std::size_t k : {2u, 3u, 5u, 10u}) {
    Dataset ds = make_dataset(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += ds.samples[i].weight = 1.0 + double(i % 4);
    const std::size_t n = 100000;
    const auto idx = weighted_sampler(ds, n, 100 + k);
    std::vector<double> counts(k);
    for (auto i : idx) counts[i] += 1.0;
    double chi2 = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double expected = double(n) * ds.samples[i].weight / total;
      chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
    }
    EXPECT_LT(chi2, chi2_critical_001(k - 1)) << "k=" << k;
  }
}

TEST(Sampler, DeterministicAndRejectsBadWeights) {
  Dataset ds = make_dataset(5);
  EXPECT_EQ(weighted_sampler(ds, 50, 1), weighted_sampler(ds, 50, 1));
  EXPECT_NE(weighted_sampler(ds, 50, 1), weighted_sampler(ds, 50, 2));
  ds.samples[2].weight = 0.0;
  EXPECT_THROW(weighted_sampler(ds, 10, 1), DataError);
}

TEST(TagWeight, AppliesOnlyToTag) {
  Dataset ds = make_dataset(6, 2);
  EXPECT_EQ(apply_tag_weight(ds, "hard", 4.0), 2u);
  EXPECT_EQ(ds.samples[0].weight, 4.0);
  EXPECT_EQ(ds.samples[5].weight, 1.0);
  EXPECT_EQ(subset_with_tag(ds, "hard").size(), 2u);
  EXPECT_THROW(apply_tag_weight(ds, "hard", 0.0), ConfigError);
}

TEST(Batch, NormalizesPixelsAndStacksLabels) {
  const std::vector<Sample> batch{make_sample(2, 3, 2, 0.5f), make_sample(2, 3, 0, 1.0f)};
  const auto [x, t] = make_batch(batch, 3);
  EXPECT_EQ(x.shape(), (Shape{2, 3, 2, 2}));
  EXPECT_EQ(x[0], 0.0f);
  EXPECT_EQ(x[12], (1.0f - kPixelMean) / kPixelStd);
  EXPECT_EQ(t[2], 1.0f);
  EXPECT_EQ(t[3], 1.0f);
  EXPECT_THROW(make_batch({}, 3), DataError);
}

TEST(Synthetic, TenClassesWithHardTags) {
  ScratchDir dir;
  SyntheticSpec spec;
  spec.per_class = 3;
  spec.hard_per_class = 1;
  const Dataset ds = load_dataset(write_synthetic_dataset(dir.path(), spec));
  EXPECT_EQ(ds.size(), 30u);
  EXPECT_EQ(ds.class_names.size(), 10u);
  EXPECT_EQ(subset_with_tag(ds, "hard").size(), 10u);
  for (const auto& s : ds.samples) {
    for (float p : s.image.pixels) ASSERT_TRUE(p >= 0.0f && p <= 1.0f);
  }
  const Dataset again = load_dataset(write_synthetic_dataset(dir / "again", spec));
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.samples[i].image.pixels, again.samples[i].image.pixels);
}

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

#include <fstream>
#include <functional>

#include "davit/config.hpp"
#include "davit/error.hpp"
#include "scratch.hpp"

using namespace davit;
using davit::testing::ScratchDir;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(DAVIT_SOURCE_DIR) / "configs";

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.model.hash(), ModelConfig::base().hash());
}

TEST(Config, ParsesSectionsCommentsAndWhitespace) {
  RunConfig cfg;
  apply_config_text(cfg,
                    "# comment\n; other comment\n\n[model]\npreset = toy\n  channels =  24 , 48 \n"
                    "[train]\nbase_lr=0.002\ncosine = yes\n[ bench ]\nruns = 3\n[run]\nseed = 9\n",
                    "inline");
  EXPECT_EQ(cfg.model.stages.size(), 2u);
  EXPECT_EQ(cfg.model.stages[0].channels, 24u);
  EXPECT_EQ(cfg.model.stages[1].channels, 48u);
  EXPECT_EQ(cfg.model.input_size, ModelConfig::toy().input_size);
  EXPECT_DOUBLE_EQ(cfg.train.base_lr, 0.002);
  EXPECT_TRUE(cfg.train.cosine);
  EXPECT_EQ(cfg.bench.runs, 3u);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.bench.seed, 9u);
}

TEST(Config, PresetResetsEarlierModelKeys) {
  RunConfig cfg;
  apply_config_text(cfg, "[model]\nnum_classes = 3\npreset = toy\n", "inline");
  EXPECT_EQ(cfg.model.num_classes, ModelConfig::toy().num_classes);
}

TEST(Config, ErrorsNameFileLineAndKey) {
  RunConfig cfg;
  auto msg = error_of([&] { apply_config_text(cfg, "[train]\n\nbase_lr = fast\n", "a.cfg"); });
  EXPECT_NE(msg.find("a.cfg:3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train.base_lr"), std::string::npos) << msg;

  msg = error_of([&] { apply_config_text(cfg, "[train]\nlearning_rate = 1\n", "b.cfg"); });
  EXPECT_NE(msg.find("b.cfg:2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;

  msg = error_of([&] { apply_config_text(cfg, "[optim]\nlr = 1\n", "c.cfg"); });
  EXPECT_NE(msg.find("unknown section 'optim'"), std::string::npos) << msg;

  EXPECT_NE(error_of([&] { apply_config_text(cfg, "lr = 1\n", "d.cfg"); }).find("outside any section"),
            std::string::npos);
  EXPECT_NE(error_of([&] { apply_config_text(cfg, "[train\n", "e.cfg"); }).find("malformed section"),
            std::string::npos);
  EXPECT_NE(error_of([&] { apply_config_text(cfg, "[train]\nbase_lr\n", "f.cfg"); }).find("key = value"),
            std::string::npos);
}

TEST(Config, RejectsBadValues) {
  RunConfig cfg;
  EXPECT_THROW(apply_override(cfg, "train.total_epochs=-1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "train.total_epochs=2.5"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "train.base_lr=inf"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "train.cosine=maybe"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "model.preset=huge"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "model.channels=1,2"), ConfigError);  // base has four stages
  EXPECT_THROW(apply_override(cfg, "data.classes=a,,b"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "run.name="), ConfigError);
  EXPECT_THROW(apply_override(cfg, "run.seed=99999999999999999999999"), ConfigError);
}

TEST(Config, OverrideSyntax) {
  RunConfig cfg;
  apply_override(cfg, "run.threshold = 0.25");
  EXPECT_DOUBLE_EQ(cfg.threshold, 0.25);
  apply_override(cfg, "data.classes=a, b ,c");
  EXPECT_EQ(cfg.classes, (std::vector<std::string>{"a", "b", "c"}));
  apply_override(cfg, "data.manifest=rel/m.csv");
  EXPECT_EQ(cfg.manifest, std::filesystem::path("rel/m.csv"));  // overrides resolve against the cwd
  EXPECT_THROW(apply_override(cfg, "threshold=0.2"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "run.threshold"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "run=x.y"), ConfigError);
}

TEST(Config, Validation) {
  const auto invalid = [](const std::string& o) {
    RunConfig cfg;
    apply_override(cfg, o);
    return error_of([&] { cfg.validate(); });
  };
  EXPECT_NE(invalid("data.train_fraction=1").find("train_fraction"), std::string::npos);
  EXPECT_NE(invalid("data.train_fraction=0").find("train_fraction"), std::string::npos);
  EXPECT_NE(invalid("train.hard_weight=0").find("hard_weight"), std::string::npos);
  EXPECT_NE(invalid("run.threshold=1").find("threshold"), std::string::npos);
  EXPECT_NE(invalid("run.eval_batch=0").find("eval_batch"), std::string::npos);
  EXPECT_NE(invalid("bench.runs=0").find("bench"), std::string::npos);
  EXPECT_NE(invalid("data.classes=a,b").find("num_classes"), std::string::npos);
  EXPECT_EQ(invalid("run.threshold=0"), "<no error>");
}

TEST(Config, FilePathsResolveAgainstFileDirectory) {
  ScratchDir dir;
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "r.cfg") << "[data]\nmanifest = m.csv\npolicy = /abs/p.policy\n[run]\noutput_dir = out\n";
  const auto cfg = load_run_config(dir / "sub" / "r.cfg");
  EXPECT_EQ(cfg.manifest, dir / "sub" / "m.csv");
  EXPECT_EQ(cfg.policy, std::filesystem::path("/abs/p.policy"));
  EXPECT_EQ(cfg.output_dir, dir / "sub" / "out");
  EXPECT_EQ(cfg.name, "r");  // file stem unless run.name is set
  EXPECT_THROW(load_run_config(dir / "missing.cfg"), ConfigError);
}

TEST(Config, ShippedConfigsLoadAndValidate) {
  for (const char* name : {"base.cfg", "toy.cfg", "toy_wide.cfg"}) {
    const auto cfg = load_run_config(kConfigs / name);
    EXPECT_NO_THROW(cfg.validate()) << name;
  }
  const auto toy = load_run_config(kConfigs / "toy.cfg");
  EXPECT_EQ(toy.model.hash(), ModelConfig::toy().hash());
  EXPECT_LE(count_params(build_model<float>(toy.model, 0)), 50000u);
  const auto wide = load_run_config(kConfigs / "toy_wide.cfg");
  EXPECT_EQ(wide.model.stages[0].channels, 2 * toy.model.stages[0].channels);
  EXPECT_EQ(wide.model.stages[1].channels, 2 * toy.model.stages[1].channels);
  EXPECT_EQ(load_run_config(kConfigs / "base.cfg").policy, kConfigs / "default.policy");
}

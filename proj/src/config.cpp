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

#include "davit/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "davit/error.hpp"

namespace davit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Field {
  std::string where;  // "file:line" or "override"
  std::string key;    // "section.key"
  std::string value;

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError(where + ": " + key + " = '" + value + "': " + why);
  }

  double real() const {
    const char* s = value.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s, &end);
    if (value.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) fail("expected a number");
    return v;
  }

  std::uint64_t u64() const {
    if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
      fail("expected a non-negative integer");
    }
    errno = 0;
    const unsigned long long v = std::strtoull(value.c_str(), nullptr, 10);
    if (errno == ERANGE) fail("integer out of range");
    return v;
  }

  std::size_t size() const { return static_cast<std::size_t>(u64()); }

  bool boolean() const {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    fail("expected true or false");
  }

  std::vector<std::string> list() const {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (out.empty() || std::any_of(out.begin(), out.end(), [](const std::string& s) { return s.empty(); })) {
      fail("expected a comma-separated list");
    }
    return out;
  }

  std::vector<std::size_t> size_list() const {
    std::vector<std::size_t> out;
    for (const auto& item : list()) {
      Field f{where, key, item};
      out.push_back(f.size());
    }
    return out;
  }

  std::filesystem::path path(const std::filesystem::path& base) const {
    if (value.empty()) return {};
    std::filesystem::path p(value);
    return p.is_relative() && !base.empty() ? base / p : p;
  }
};

template <typename Setter>
void per_stage(RunConfig& cfg, const Field& f, Setter set) {
  const auto values = f.size_list();
  if (values.size() != cfg.model.stages.size()) {
    f.fail("expected " + std::to_string(cfg.model.stages.size()) + " values, one per stage");
  }
  for (std::size_t i = 0; i < values.size(); ++i) set(cfg.model.stages[i], values[i]);
}

void apply_model(RunConfig& cfg, const Field& f, const std::string& key) {
  auto& m = cfg.model;
  if (key == "preset") {
    if (f.value == "base") {
      m = ModelConfig::base();
    } else if (f.value == "toy") {
      m = ModelConfig::toy();
    } else {
      f.fail("unknown preset (base, toy)");
    }
  } else if (key == "input_size") {
    m.input_size = f.size();
  } else if (key == "input_channels") {
    m.input_channels = f.size();
  } else if (key == "num_classes") {
    m.num_classes = f.size();
  } else if (key == "ffn_expansion") {
    m.ffn_expansion = f.real();
  } else if (key == "norm_eps") {
    m.norm_eps = f.real();
  } else if (key == "channel_scale") {
    if (f.value == "group_width") {
      m.channel_scale = ChannelScale::GroupWidth;
    } else if (f.value == "spatial") {
      m.channel_scale = ChannelScale::Spatial;
    } else {
      f.fail("expected group_width or spatial");
    }
  } else if (key == "channels") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.channels = v; });
  } else if (key == "depths") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.depth = v; });
  } else if (key == "window_sizes") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.window_size = v; });
  } else if (key == "head_widths") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.head_width = v; });
  } else if (key == "embed_kernels") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.embed_kernel = v; });
  } else if (key == "embed_strides") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.embed_stride = v; });
  } else if (key == "embed_pads") {
    per_stage(cfg, f, [](StageConfig& s, std::size_t v) { s.embed_pad = v; });
  } else {
    f.fail("unknown key");
  }
}

void apply_train(RunConfig& cfg, const Field& f, const std::string& key) {
  auto& t = cfg.train;
  if (key == "base_lr") {
    t.base_lr = f.real();
  } else if (key == "warmup_epochs") {
    t.warmup_epochs = f.size();
  } else if (key == "total_epochs") {
    t.total_epochs = f.size();
  } else if (key == "batch_size") {
    t.batch_size = f.size();
  } else if (key == "weight_decay") {
    t.weight_decay = f.real();
  } else if (key == "beta1") {
    t.beta1 = f.real();
  } else if (key == "beta2") {
    t.beta2 = f.real();
  } else if (key == "eps") {
    t.eps = f.real();
  } else if (key == "mixup_alpha") {
    t.mixup_alpha = f.real();
  } else if (key == "cosine") {
    t.cosine = f.boolean();
  } else if (key == "hard_tag") {
    cfg.hard_tag = f.value;
  } else if (key == "hard_weight") {
    cfg.hard_weight = f.real();
  } else {
    f.fail("unknown key");
  }
}

void apply_data(RunConfig& cfg, const Field& f, const std::string& key, const std::filesystem::path& base) {
  if (key == "manifest") {
    cfg.manifest = f.path(base);
  } else if (key == "policy") {
    cfg.policy = f.path(base);
  } else if (key == "classes") {
    cfg.classes = f.list();
  } else if (key == "train_fraction") {
    cfg.train_fraction = f.real();
  } else if (key == "split_seed") {
    cfg.split_seed = f.u64();
  } else if (key == "holdout_tag") {
    cfg.holdout_tag = f.value;
  } else {
    f.fail("unknown key");
  }
}

void apply_run(RunConfig& cfg, const Field& f, const std::string& key, const std::filesystem::path& base) {
  if (key == "name") {
    if (f.value.empty()) f.fail("name must not be empty");
    cfg.name = f.value;
  } else if (key == "seed") {
    cfg.set_seed(f.u64());
  } else if (key == "output_dir") {
    cfg.output_dir = f.path(base);
  } else if (key == "threshold") {
    cfg.threshold = f.real();
  } else if (key == "eval_batch") {
    cfg.eval_batch = f.size();
  } else {
    f.fail("unknown key");
  }
}

void apply_bench(RunConfig& cfg, const Field& f, const std::string& key) {
  auto& b = cfg.bench;
  if (key == "batch_size") {
    b.batch_size = f.size();
  } else if (key == "warmup_iters") {
    b.warmup_iters = f.size();
  } else if (key == "timed_iters") {
    b.timed_iters = f.size();
  } else if (key == "runs") {
    b.runs = f.size();
  } else {
    f.fail("unknown key");
  }
}

void apply_field(RunConfig& cfg, const std::string& section, const std::string& key, const Field& f,
                 const std::filesystem::path& base) {
  if (section == "model") {
    apply_model(cfg, f, key);
  } else if (section == "train") {
    apply_train(cfg, f, key);
  } else if (section == "data") {
    apply_data(cfg, f, key, base);
  } else if (section == "run") {
    apply_run(cfg, f, key, base);
  } else if (section == "bench") {
    apply_bench(cfg, f, key);
  } else {
    f.fail("unknown section '" + section + "'");
  }
}

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  bench.seed = seed;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("data: train_fraction must lie in (0, 1)");
  if (!(hard_weight > 0.0)) throw ConfigError("train: hard_weight must be > 0");
  if (!(threshold >= 0.0 && threshold < 1.0)) throw ConfigError("run: threshold must lie in [0, 1)");
  if (eval_batch < 1) throw ConfigError("run: eval_batch must be >= 1");
  if (bench.batch_size < 1 || bench.timed_iters < 1 || bench.runs < 1) {
    throw ConfigError("bench: batch_size, timed_iters and runs must be >= 1");
  }
  if (!classes.empty() && classes.size() != model.num_classes) {
    throw ConfigError("data: " + std::to_string(classes.size()) + " classes listed but model.num_classes is " +
                      std::to_string(model.num_classes));
  }
}

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source,
                       const std::filesystem::path& base_dir) {
  std::stringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const Field f{where, section + "." + key, trim(line.substr(eq + 1))};
    apply_field(cfg, section, key, f, base_dir);
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  cfg.name = path.stem().string();
  apply_config_text(cfg, ss.str(), path.string(), path.parent_path());
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "': expected section.key=value");
  }
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  const Field f{"override", section + "." + key, trim(assignment.substr(eq + 1))};
  apply_field(cfg, section, key, f, {});
}

}  // namespace davit

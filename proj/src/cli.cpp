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

#include "davit/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "davit/bench.hpp"
#include "davit/checkpoint.hpp"
#include "davit/config.hpp"
#include "davit/dataset.hpp"
#include "davit/error.hpp"
#include "json.hpp"

namespace davit {

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string output_dir;
  double threshold = 0.5;
  bool threshold_set = false;
};

RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  for (const auto& o : a.overrides) apply_override(cfg, o);
  if (a.seed_set) cfg.set_seed(a.seed);
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  if (a.threshold_set) cfg.threshold = a.threshold;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool with_output) {
  cmd->add_option("--set", a.overrides, "Override a config value, section.key=value")->take_all();
  cmd->add_option("--seed", a.seed, "Seed for initialization, sampling and augmentation")
      ->each([&a](const std::string&) { a.seed_set = true; });
  cmd->add_option("--threshold", a.threshold, "Minimum top-class probability for a prediction to count")
      ->each([&a](const std::string&) { a.threshold_set = true; });
  if (with_output) cmd->add_option("--output-dir", a.output_dir, "Directory for checkpoints and reports");
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

struct Splits {
  Dataset train, val;
};

Splits load_splits(RunConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("data.manifest is not set");
  if (!std::filesystem::exists(cfg.manifest)) throw DataError("manifest not found: " + cfg.manifest.string());
  const Dataset ds = load_dataset(cfg.manifest, cfg.classes);
  if (ds.class_names.size() != cfg.model.num_classes) {
    throw ConfigError("dataset " + cfg.manifest.string() + " has " + std::to_string(ds.class_names.size()) +
                      " classes but model.num_classes is " + std::to_string(cfg.model.num_classes));
  }
  if (ds.image_size != cfg.model.input_size) {
    throw DataError("dataset images are " + std::to_string(ds.image_size) + " px but model.input_size is " +
                    std::to_string(cfg.model.input_size));
  }
  std::set<std::string> holdout;
  if (!cfg.holdout_tag.empty()) holdout.insert(cfg.holdout_tag);
  auto [train, val] = split_dataset(ds, cfg.train_fraction, cfg.split_seed, holdout);
  return {std::move(train), std::move(val)};
}

AugmentPolicy load_policy(const RunConfig& cfg) {
  if (cfg.policy.empty()) return {};
  if (!std::filesystem::exists(cfg.policy)) throw DataError("augmentation policy not found: " + cfg.policy.string());
  return AugmentPolicy::load(cfg.policy);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

int cmd_train(const CommonArgs& a, const std::string& init_from, bool force, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(a);
  auto [train, val] = load_splits(cfg);
  const AugmentPolicy policy = load_policy(cfg);
  if (cfg.hard_weight != 1.0) {
    const std::size_t n = apply_tag_weight(train, cfg.hard_tag, cfg.hard_weight);
    out << "weighted " << n << " '" << cfg.hard_tag << "' training samples by " << cfg.hard_weight << '\n';
  }
  out << "train " << train.size() << " samples, val " << val.size() << " samples\n";
  Model<float> model = build_model<float>(cfg.model, cfg.train.seed);
  std::filesystem::create_directories(cfg.output_dir);

  if (!init_from.empty()) {
    const CheckpointFile ckpt = read_checkpoint(init_from);
    load_into(model, ckpt, force);
    if (ckpt.meta.config_hash != cfg.model.hash()) err << "warning: config hash differs from " << init_from << '\n';
    const EvalReport ev = evaluate(model, val, cfg.threshold, cfg.eval_batch);
    const bool same = ev.correct == ckpt.meta.val_correct && ev.total == ckpt.meta.val_total;
    nlohmann::ordered_json j;
    j["checkpoint"] = init_from;
    j["checkpoint_epoch"] = ckpt.meta.epoch;
    j["checkpoint_val_correct"] = ckpt.meta.val_correct;
    j["checkpoint_val_total"] = ckpt.meta.val_total;
    j["matches_checkpoint"] = same;
    j["eval"] = nlohmann::ordered_json::parse(ev.to_json());
    write_text(cfg.output_dir / "init_eval.json", j.dump(2));
    out << "init from " << init_from << ": val " << ev.correct << "/" << ev.total << " (checkpoint recorded "
        << ckpt.meta.val_correct << "/" << ckpt.meta.val_total << ")\n";
    if (!same) err << "warning: epoch-0 evaluation differs from the accuracy recorded in " << init_from << '\n';
  }

  FitOptions opts;
  opts.output_dir = cfg.output_dir;
  opts.threshold = cfg.threshold;
  opts.on_epoch = [&out](const EpochRecord& r) {
    out << "epoch " << r.epoch << " lr " << r.lr << " loss " << fixed(r.train_loss, 4) << " train_acc "
        << fixed(r.train_acc, 4) << " val_acc " << fixed(r.val_acc, 4) << " rejected " << r.rejected << '\n';
  };
  const FitResult res = fit(model, train, val, policy, cfg.train, opts);
  out << "best epoch " << res.best_epoch << " val_acc " << fixed(res.best_eval.accuracy, 4) << " ("
      << res.best_eval.correct << "/" << res.best_eval.total << "), checkpoints in " << cfg.output_dir.string() << '\n';
  return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& checkpoint, const std::string& split, bool force,
             const std::string& report_path, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve(a);
  auto [train, val] = load_splits(cfg);
  Model<float> model = build_model<float>(cfg.model, 0);
  const CheckpointFile ckpt = read_checkpoint(checkpoint);
  load_into(model, ckpt, force);
  if (ckpt.meta.config_hash != cfg.model.hash()) err << "warning: config hash differs from " << checkpoint << '\n';
  const Dataset* ds = split == "train" ? &train : &val;
  const EvalReport ev = evaluate(model, *ds, cfg.threshold, cfg.eval_batch);
  std::filesystem::path path = report_path;
  if (path.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    path = cfg.output_dir / "eval.json";
  }
  write_text(path, ev.to_json());
  out << split << " accuracy " << fixed(ev.accuracy, 4) << " (" << ev.correct << "/" << ev.total << ") threshold "
      << ev.threshold << " rejected " << ev.rejected << '\n';
  for (std::size_t k = 0; k < ev.class_names.size(); ++k) {
    out << "  " << std::left << std::setw(24) << ev.class_names[k] << std::right << ev.class_correct[k] << "/"
        << ev.class_total[k] << '\n';
  }
  out << "report written to " << path.string() << '\n';
  return 0;
}

struct BenchFlags {
  std::optional<std::size_t> batch_size, warmup, iters, runs;
};

int cmd_bench(const std::vector<std::string>& configs, const std::vector<std::string>& overrides,
              const BenchFlags& flags, const std::string& csv, std::ostream& out) {
  std::vector<NamedConfig> models;
  BenchOptions opts;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunConfig cfg = load_run_config(configs[i]);
    for (const auto& o : overrides) apply_override(cfg, o);
    cfg.validate();
    if (i == 0) opts = cfg.bench;
    models.push_back({cfg.name, cfg.model});
  }
  if (flags.batch_size) opts.batch_size = *flags.batch_size;
  if (flags.warmup) opts.warmup_iters = *flags.warmup;
  if (flags.iters) opts.timed_iters = *flags.iters;
  if (flags.runs) opts.runs = *flags.runs;
  const auto reports = compare_models(models, opts);
  out << format_bench_table(reports);
  if (!csv.empty()) {
    std::ofstream f(csv);
    if (!f) throw DataError("cannot write " + csv);
    write_bench_csv(f, reports);
    if (!f) throw DataError("failed writing " + csv);
  } else {
    write_bench_csv(out, reports);
  }
  return 0;
}

int cmd_inspect(const CommonArgs& a, bool run_forward, std::ostream& out) {
  const RunConfig cfg = resolve(a);
  const auto& m = cfg.model;
  const auto sizes = m.stage_sizes();
  out << "model " << cfg.name << " input " << m.input_channels << "x" << m.input_size << "x" << m.input_size
      << " classes " << m.num_classes << '\n';
  out << "params " << count_params(m) << '\n';
  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    const auto& s = m.stages[i];
    out << "stage " << i + 1 << " size " << sizes[i] << "x" << sizes[i] << " channels " << s.channels << " depth "
        << s.depth << " window " << s.window_size << " heads " << s.channels / s.head_width << '\n';
  }
  if (run_forward) {
    const auto t0 = std::chrono::steady_clock::now();
    const Model<float> model = build_model<float>(m, cfg.train.seed);
    const Tensorf x = Tensorf::create({1, m.input_channels, m.input_size, m.input_size},
                                      TruncatedNormalFill{0.5, 0.25, cfg.train.seed});
    ForwardTrace trace;
    const Tensorf logits = forward(x, model, &trace);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (std::size_t i = 0; i < trace.stage_outputs.size(); ++i) {
      out << "forward stage " << i + 1 << " output " << shape_str(trace.stage_outputs[i]) << '\n';
    }
    out << "forward logits " << shape_str(logits.shape()) << " in " << fixed(secs, 3) << " s\n";
  }
  out << "logits width " << m.num_classes << '\n';
  return 0;
}

int cmd_synth(const std::string& dir, const SyntheticSpec& spec, std::ostream& out) {
  const auto manifest = write_synthetic_dataset(dir, spec);
  out << "wrote " << spec.per_class * 10 << " images, manifest " << manifest.string() << '\n';
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"DaViT logo classifier: train, evaluate, benchmark and inspect models", "davit"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, inspect_args;
  std::string init_from, checkpoint, split = "val", report, csv, synth_dir;
  bool force = false, eval_force = false, no_forward = false;

  auto* train = app.add_subcommand("train", "Train a model and write best.ckpt, last.ckpt and metrics.jsonl");
  train->add_option("--config", train_args.config, "Run config file")->required();
  add_common(train, train_args, true);
  train->add_option("--init-from", init_from, "Initialize weights from a checkpoint before training");
  train->add_flag("--force", force, "Load a checkpoint even if its config hash differs");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write a JSON report");
  eval->add_option("--config", eval_args.config, "Run config file")->required();
  add_common(eval, eval_args, true);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--split", split, "Which split to evaluate")->check(CLI::IsMember({"val", "train"}));
  eval->add_option("--report", report, "JSON report path (default <output_dir>/eval.json)");
  eval->add_flag("--force", eval_force, "Load the checkpoint even if its config hash differs");

  std::vector<std::string> bench_configs, bench_overrides;
  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Measure inference throughput of one or more model configs");
  bench->add_option("--config", bench_configs, "Model config, repeat to compare")->required();
  bench->add_option("--set", bench_overrides, "Override applied to every config")->take_all();
  bench->add_option("--csv", csv, "Write the CSV report here instead of standard output");
  bench->add_option("--batch-size", bench_flags.batch_size)->check(CLI::PositiveNumber);
  bench->add_option("--warmup", bench_flags.warmup);
  bench->add_option("--iters", bench_flags.iters, "Timed iterations per run")->check(CLI::PositiveNumber);
  bench->add_option("--runs", bench_flags.runs, "Repeated runs; the median-fps run is reported")
      ->check(CLI::PositiveNumber);

  auto* inspect = app.add_subcommand("inspect", "Print parameter count and per-stage output sizes");
  inspect->add_option("--config", inspect_args.config, "Run config file (default: the four-stage model)");
  add_common(inspect, inspect_args, false);
  inspect->add_flag("--no-forward", no_forward, "Skip the traced forward pass");

  SyntheticSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "Write the synthetic ten-class shape/colour dataset");
  synth->add_option("--output-dir", synth_dir, "Destination directory")->required();
  synth->add_option("--per-class", synth_spec.per_class)->check(CLI::PositiveNumber);
  synth->add_option("--hard-per-class", synth_spec.hard_per_class);
  synth->add_option("--image-size", synth_spec.image_size)->check(CLI::Range(8, 4096));
  synth->add_option("--seed", synth_spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : kExitUsage;  // --help exits 0
  }

  try {
    if (*train) return cmd_train(train_args, init_from, force, out, err);
    if (*eval) return cmd_eval(eval_args, checkpoint, split, eval_force, report, out, err);
    if (*bench) return cmd_bench(bench_configs, bench_overrides, bench_flags, csv, out);
    if (*inspect) return cmd_inspect(inspect_args, !no_forward, out);
    if (*synth) return cmd_synth(synth_dir, synth_spec, out);
  } catch (const CheckpointCorruptError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return kExitCorruptCheckpoint;
  } catch (const CheckpointMismatchError& e) {
    err << "error: checkpoint mismatch: " << one_line(e.what()) << '\n';
    return kExitCheckpointMismatch;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace davit

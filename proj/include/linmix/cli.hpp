// Copyright 2026 The linmix Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `linmix` command line: train, eval, analyze and check.
//
// Exit codes: 0 success, 1 runtime or check failure, 2 usage error.

#pragma once

#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linmix/cost.hpp"
#include "linmix/io.hpp"
#include "linmix/suites.hpp"

namespace linmix {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace cli {

/// Flags that overlay a ModelConfig; unset flags leave the base untouched.
struct DimFlags {
  std::optional<std::string> arch;
  std::optional<std::size_t> height, width, channels, patch, embed_dim, depth,
      token_hidden, channel_hidden, memory, heads, classes, tokens;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app, bool with_arch) {
    static const std::vector<std::string> names = {"mixer", "ext_attn", "ff_only",
                                                   "resmlp"};
    if (with_arch)
      app.add_option("--arch", arch, "Architecture")->check(CLI::IsMember(names));
    app.add_option("--height", height, "Image height in pixels");
    app.add_option("--width", width, "Image width in pixels");
    app.add_option("--channels", channels, "Image channels");
    app.add_option("--P", patch, "Patch side");
    app.add_option("--C", embed_dim, "Embedding width");
    app.add_option("--depth", depth, "Number of blocks");
    app.add_option("--D_S", token_hidden, "Token-MLP hidden width");
    app.add_option("--D_C", channel_hidden, "Channel-MLP hidden width");
    app.add_option("--S_mem", memory, "External-attention memory rows");
    app.add_option("--H", heads, "External-attention heads");
    app.add_option("--classes", classes, "Output classes");
    app.add_option("--seed", seed, "Initialization and shuffle seed");
  }

  /// --S sets a 1 x S strip of patches: height P, width P * S.
  void add_tokens(CLI::App& app) {
    app.add_option("--S", tokens, "Token count (lays patches out as a 1 x S strip)")
        ->excludes(app.get_option("--height"))
        ->excludes(app.get_option("--width"));
  }

  ModelConfig apply(ModelConfig cfg) const {
    if (arch) cfg.arch = parse_arch(*arch);
    if (height) cfg.height = *height;
    if (width) cfg.width = *width;
    if (channels) cfg.channels = *channels;
    if (patch) cfg.patch = *patch;
    if (embed_dim) cfg.embed_dim = *embed_dim;
    if (depth) cfg.depth = *depth;
    if (token_hidden) cfg.token_hidden = *token_hidden;
    if (channel_hidden) cfg.channel_hidden = *channel_hidden;
    if (memory) cfg.memory = *memory;
    if (heads) cfg.heads = *heads;
    if (classes) cfg.classes = *classes;
    if (seed) cfg.seed = *seed;
    if (tokens) {
      if (*tokens == 0) throw ConfigError("--S must be positive");
      cfg.height = cfg.patch;
      cfg.width = cfg.patch * *tokens;
    }
    return cfg;
  }
};

struct DataFlags {
  std::vector<std::string> paths;  // "synthetic" or IMAGES LABELS
  std::size_t n = 512;
  std::uint64_t data_seed = 1;

  void add(CLI::App& app) {
    app.add_option("--data", paths, "'synthetic' or IDX image and label paths")
        ->expected(1, 2)
        ->required();
    app.add_option("--n", n, "Synthetic example count")->capture_default_str();
    app.add_option("--data-seed", data_seed, "Synthetic data seed")
        ->capture_default_str();
  }

  bool synthetic() const { return paths.size() == 1 && paths[0] == "synthetic"; }

  /// Loads or generates the data. Synthetic data takes its geometry and
  /// class count from `cfg`.
  Dataset load(const ModelConfig& cfg) const {
    if (synthetic()) {
      if (cfg.channels != 1 || cfg.height != cfg.width) {
        throw ConfigError("--data synthetic needs square single-channel images, got " +
                          std::to_string(cfg.channels) + "x" +
                          std::to_string(cfg.height) + "x" +
                          std::to_string(cfg.width));
      }
      return gen_synthetic(n, cfg.classes, cfg.height, data_seed);
    }
    if (paths.size() != 2) {
      throw ConfigError("--data expects 'synthetic' or two IDX paths (images labels)");
    }
    return load_idx(paths[0], paths[1]);
  }
};

/// Adopts the geometry and class count of IDX data.
inline ModelConfig fit_config_to(ModelConfig cfg, const Dataset& data) {
  if (data.size() == 0) return cfg;
  const Tensor& img = data.images.front();
  cfg.channels = img.dim(0);
  cfg.height = img.dim(1);
  cfg.width = img.dim(2);
  cfg.classes = std::max(cfg.classes, data.classes);
  return cfg;
}

inline std::string metrics_json(const Metrics& m, std::size_t n) {
  ojson j;
  j["n"] = n;
  j["accuracy"] = m.accuracy;
  j["loss"] = m.mean_loss;
  return j.dump();
}

}  // namespace cli

/**
 * Runs the command line with explicit output streams. Usage errors print the
 * relevant help text to `err` and return 2.
 */
inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Linear-layer vision models: train, evaluate, analyze, self-check",
               "linmix"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
  cli::DimFlags train_dims;
  cli::DataFlags train_data;
  std::optional<std::string> train_config;
  std::string opt_name = "adam";
  TrainOptions topts;
  std::optional<double> stop_at;
  std::string ckpt_path = "model.ckpt";
  std::optional<std::string> history_path;
  bool verbose = false;
  train_dims.add(*train_cmd, true);
  train_data.add(*train_cmd);
  train_cmd->add_option("--config", train_config, "JSON config file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", topts.epochs, "Epochs")->capture_default_str();
  train_cmd->add_option("--lr", topts.lr, "Learning rate")->capture_default_str();
  train_cmd->add_option("--opt", opt_name, "Optimizer")
      ->check(CLI::IsMember({"adam", "sgd"}))
      ->capture_default_str();
  train_cmd->add_option("--batch", topts.batch, "Mini-batch size")
      ->capture_default_str();
  train_cmd->add_option("--threads", topts.threads, "Gradient worker threads")
      ->capture_default_str();
  train_cmd->add_option("--stop-at", stop_at,
                        "Stop once train accuracy reaches this value");
  train_cmd->add_option("--out", ckpt_path, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--history", history_path,
                        "History path (default: <out>.history.ndjson)");
  train_cmd->add_flag("--verbose", verbose, "Print one line per epoch");

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string model_path;
  cli::DataFlags eval_data;
  eval_cmd->add_option("--model", model_path, "Checkpoint path")->required();
  eval_data.add(*eval_cmd);

  // analyze
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "Parameter and FLOP counts per architecture");
  cli::DimFlags analyze_dims;
  std::optional<std::string> analyze_config;
  bool all_archs = false;
  std::string format_name = "csv";
  std::optional<std::string> report_path;
  analyze_dims.add(*analyze_cmd, true);
  analyze_dims.add_tokens(*analyze_cmd);
  analyze_cmd->add_flag("--all", all_archs, "Report every architecture")
      ->excludes(analyze_cmd->get_option("--arch"));
  analyze_cmd->add_option("--config", analyze_config, "JSON config file")
      ->check(CLI::ExistingFile);
  analyze_cmd->add_option("--format", format_name, "Report format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  analyze_cmd->add_option("--out", report_path, "Report path (default: stdout)");

  // check
  CLI::App* check_cmd = app.add_subcommand("check", "Run self-check suites");
  std::string suite_name = "all";
  std::uint64_t suite_seed = 1;
  check_cmd->add_option("--suite", suite_name, "Suite to run")
      ->check(CLI::IsMember({"gradcheck", "equivalence", "invariants", "all"}))
      ->capture_default_str();
  check_cmd->add_option("--seed", suite_seed, "Base seed for random draws")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help()
                                          : app.get_subcommands().front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      ModelConfig cfg = train_config ? load_config_file(*train_config) : ModelConfig{};
      cfg = train_dims.apply(cfg);
      Dataset data = train_data.load(cfg);
      if (!train_data.synthetic()) cfg = cli::fit_config_to(cfg, data);
      topts.opt = parse_optimizer(opt_name);
      topts.stop_at_accuracy = stop_at;
      TrainResult result = train(cfg, data, topts);
      if (verbose) {
        for (const auto& rec : result.history) {
          out << "epoch " << rec.epoch << " loss " << rec.loss << " acc " << rec.acc
              << "\n";
        }
      }
      save_checkpoint(result.model, ckpt_path);
      const std::string hist = history_path.value_or(ckpt_path + ".history.ndjson");
      write_history(result.history, hist);
      const EpochRecord last =
          result.history.empty() ? EpochRecord{} : result.history.back();
      out << "trained " << arch_name(cfg.arch) << " for " << result.history.size()
          << " epochs: loss " << last.loss << ", acc " << last.acc << "\n"
          << "checkpoint: " << ckpt_path << "\nhistory: " << hist << "\n";
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      const Model<> m = load_checkpoint(model_path);
      const Dataset data = eval_data.load(m.cfg);
      out << cli::metrics_json(evaluate(m, data), data.size()) << "\n";
      return kExitOk;
    }
    if (analyze_cmd->parsed()) {
      ModelConfig base =
          analyze_config ? load_config_file(*analyze_config) : ModelConfig{};
      base = analyze_dims.apply(base);
      std::vector<CostReport> reports;
      if (all_archs) {
        for (Arch a : kAllArchs) {
          ModelConfig cfg = base;
          cfg.arch = a;
          reports.push_back(cost_report(cfg));
        }
      } else {
        reports.push_back(cost_report(base));
      }
      const ReportFormat format = parse_report_format(format_name);
      if (report_path) {
        emit_report(reports, format, *report_path);
      } else {
        out << render_reports(reports, format);
      }
      return kExitOk;
    }
    if (check_cmd->parsed()) {
      const SuiteReport report = run_suite(suite_name, suite_seed);
      out << format_report(report);
      return report.passed() ? kExitOk : kExitFailure;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

inline int run_cli(int argc, const char* const* argv) {
  return run_cli(argc, argv, std::cout, std::cerr);
}

}  // namespace linmix

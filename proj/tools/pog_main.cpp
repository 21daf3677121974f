// pog_main.cpp
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

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pog/errors.hpp"
#include "pog/experiment.hpp"
#include "pog/serialize.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  pog::ExperimentConfig resolve() const {
    std::vector<std::string> ovs = overrides;
    if (out_dir) ovs.push_back("out_dir=" + *out_dir);
    return pog::ExperimentConfig::load(config_path, ovs);
  }
  std::uint64_t seed_or(const pog::ExperimentConfig& cfg) const {
    if (seed) return *seed;
    return cfg.seeds.empty() ? 1 : cfg.seeds[0];
  }
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required();
  cmd->add_option("--seed", args.seed, "run seed (defaults to first config seed)");
  cmd->add_option("--out", args.out_dir, "output directory override");
  cmd->add_option("--override", args.overrides,
                  "config override key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intent classification with generated pseudo-OOD training data"};
  app.require_subcommand(1);

  CommonArgs train_pog_args, train_aepog_args, train_clf_args, eval_args;

  CLI::App* cmd_train_pog =
      app.add_subcommand("train-pog", "train the generation model on IND data");
  attach_common(cmd_train_pog, train_pog_args);

  CLI::App* cmd_train_aepog = app.add_subcommand(
      "train-aepog", "train the generation model with unlabeled mix data");
  attach_common(cmd_train_aepog, train_aepog_args);

  CLI::App* cmd_train_clf =
      app.add_subcommand("train-classifier", "train an intent classifier");
  attach_common(cmd_train_clf, train_clf_args);

  CLI::App* cmd_eval = app.add_subcommand(
      "evaluate", "train detectors and report OOD detection metrics");
  attach_common(cmd_eval, eval_args);

  std::string gen_checkpoint, gen_out = "samples.jsonl";
  int gen_n = 100;
  std::uint64_t gen_seed = 1;
  CLI::App* cmd_generate =
      app.add_subcommand("generate", "sample pseudo-OOD utterances");
  cmd_generate->add_option("--checkpoint", gen_checkpoint, "model checkpoint")
      ->required();
  cmd_generate->add_option("--n", gen_n, "number of samples");
  cmd_generate->add_option("--seed", gen_seed, "sampling seed");
  cmd_generate->add_option("--out", gen_out, "output sample file");

  std::string metrics_scores, metrics_out;
  CLI::App* cmd_metrics = app.add_subcommand(
      "metrics", "compute detection metrics from a score file");
  cmd_metrics->add_option("--scores", metrics_scores,
                          "line-delimited {score, label} records")
      ->required();
  cmd_metrics->add_option("--out", metrics_out, "report output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_train_pog->parsed()) {
      pog::ExperimentConfig cfg = train_pog_args.resolve();
      cfg.pog.mode = "pog";
      std::string path =
          pog::run_train_pog(cfg, train_pog_args.seed_or(cfg));
      std::cout << "checkpoint: " << path << "\n";
    } else if (cmd_train_aepog->parsed()) {
      pog::ExperimentConfig cfg = train_aepog_args.resolve();
      cfg.pog.mode = "aepog";
      std::string path =
          pog::run_train_pog(cfg, train_aepog_args.seed_or(cfg));
      std::cout << "checkpoint: " << path << "\n";
    } else if (cmd_train_clf->parsed()) {
      pog::ExperimentConfig cfg = train_clf_args.resolve();
      std::string path =
          pog::run_train_classifier(cfg, train_clf_args.seed_or(cfg));
      std::cout << "checkpoint: " << path << "\n";
    } else if (cmd_eval->parsed()) {
      pog::ExperimentConfig cfg = eval_args.resolve();
      pog::EvaluateResult result =
          pog::run_evaluate(cfg, true, &std::cerr);
      std::cout << pog::aggregate_csv(result);
    } else if (cmd_generate->parsed()) {
      pog::run_generate(gen_checkpoint, gen_n, gen_seed, gen_out, std::cout);
    } else if (cmd_metrics->parsed()) {
      pog::DetectionReport report = pog::run_metrics_file(metrics_scores);
      if (metrics_out.empty())
        std::cout << report.to_json().dump(2) << "\n";
      else
        pog::write_json_file(metrics_out, report.to_json());
    }
  } catch (const pog::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const pog::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

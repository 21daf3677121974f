// experiment.hpp
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

#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pog/classifier.hpp"
#include "pog/detection.hpp"
#include "pog/pog_trainer.hpp"

namespace pog {

// One experiment = one config file; seeds enumerate independent runs.
struct ExperimentConfig {
  nlohmann::json raw;  // resolved config, echoed into every artifact

  std::string dataset_path;
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int max_len = 32;
  int min_count = 1;
  std::vector<double> target_tprs = {95, 90};
  std::vector<std::string> detectors = {"msp"};
  int sample_n = 0;  // 0 = size of ind_train

  ClassifierConfig classifier;
  PogConfig pog;
  int ae_epochs = 30;
  Scalar ae_noise_std = 0.0;

  static ExperimentConfig from_json(nlohmann::json j);
  static ExperimentConfig load(const std::string& path,
                               const std::vector<std::string>& overrides = {});
};

// Order-independent stream derivation for a (seed, purpose) pair.
std::uint64_t derived_seed(std::uint64_t seed, const std::string& tag);

struct EvaluateResult {
  std::vector<std::string> methods;
  std::map<std::string, std::vector<DetectionReport>> reports;  // per seed
  // method -> metric -> (mean, sample std over seeds)
  std::map<std::string, std::map<std::string, std::pair<double, double>>>
      aggregate;
};

// Trains whatever each detector needs, scores the test splits, writes one
// report per detector x seed plus an aggregate CSV.
EvaluateResult run_evaluate(const ExperimentConfig& cfg,
                            bool write_outputs = true,
                            std::ostream* progress = nullptr);

// Returns the checkpoint path. Mode comes from cfg.pog.mode.
std::string run_train_pog(const ExperimentConfig& cfg, std::uint64_t seed);

std::string run_train_classifier(const ExperimentConfig& cfg,
                                 std::uint64_t seed);

void run_generate(const std::string& checkpoint_path, int n,
                  std::uint64_t seed, const std::string& out_path,
                  std::ostream& console);

// Score-file-only metrics: line-delimited {"score": x, "label": "ind"|"ood"}.
DetectionReport run_metrics_file(const std::string& scores_path);

std::string aggregate_csv(const EvaluateResult& result);

}  // namespace pog

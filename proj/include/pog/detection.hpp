// detection.hpp
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

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pog/autoencoder.hpp"
#include "pog/classifier.hpp"

namespace pog {

// Scores follow one convention for every method: higher = more IND-like.
struct ScoredSet {
  std::vector<double> ind_scores;
  std::vector<double> ood_scores;
  std::string method;
};

// P(ind > ood) + 0.5 P(tie) over all IND x OOD pairs; IND is positive.
double auroc(const ScoredSet& s);

// Precision-recall area with OOD as the positive class, thresholds swept over
// ascending observed scores, precision summed over recall increments.
double aupr(const ScoredSet& s);

// FPR at the largest threshold that keeps IND TPR >= n_percent.
double fpr_at_tpr(const ScoredSet& s, double n_percent);

// Same threshold rule applied to validation IND scores alone; ties resolve to
// the largest qualifying observed score.
double select_threshold(const std::vector<double>& val_ind_scores,
                        double target_tpr_percent);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};
std::vector<RocPoint> roc_points(const ScoredSet& s);

struct ScoreHistogram {
  std::vector<double> bin_edges;  // bins + 1 edges shared by both populations
  std::vector<long> ind;
  std::vector<long> ood;
};
ScoreHistogram score_histogram(const ScoredSet& s, int bins = 50);

// Sum over bins of min(p_ind, p_ood); 0 = disjoint, 1 = identical.
double overlap_coefficient(const ScoredSet& s, int bins = 50);

struct DetectionReport {
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::optional<double> auroc_value;
  std::optional<double> aupr_value;
  std::optional<double> fpr95;
  std::optional<double> fpr90;
  std::optional<double> ind_accuracy;
  std::optional<double> threshold;
  std::vector<RocPoint> roc;
  ScoreHistogram hist;
  nlohmann::json config_echo;

  nlohmann::json to_json() const;
  static DetectionReport from_json(const nlohmann::json& j);
};

// Metrics requiring OOD scores are left absent when ood is empty.
DetectionReport make_report(const ScoredSet& s,
                            std::optional<double> ind_accuracy,
                            std::optional<double> threshold,
                            const std::vector<double>& target_tprs = {95, 90});

// ---- scoring backends -------------------------------------------------------

double score_msp(IntentClassifier& clf, const TokenSequence& x);
double score_entropy(IntentClassifier& clf, const TokenSequence& x);
double score_ae(TextAutoencoder& ae, const TokenSequence& x);

std::vector<double> msp_scores(IntentClassifier& clf,
                               const std::vector<TokenSequence>& xs);
std::vector<double> entropy_scores(IntentClassifier& clf,
                                   const std::vector<TokenSequence>& xs);
std::vector<double> ae_scores(TextAutoencoder& ae,
                              const std::vector<TokenSequence>& xs);

// Per-class centroids of penultimate-layer features over IND training data;
// score = -distance to the nearest centroid.
struct KnnScorer {
  Matrix centroids;  // m x feature_dim
};
KnnScorer fit_knn(IntentClassifier& clf, const std::vector<TokenSequence>& xs,
                  const std::vector<int>& labels);
double score_knn(const KnnScorer& scorer, IntentClassifier& clf,
                 const TokenSequence& x);
std::vector<double> knn_scores(const KnnScorer& scorer, IntentClassifier& clf,
                               const std::vector<TokenSequence>& xs);

double classification_accuracy(IntentClassifier& clf,
                               const std::vector<TokenSequence>& xs,
                               const std::vector<int>& labels);

}  // namespace pog

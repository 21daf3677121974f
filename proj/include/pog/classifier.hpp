// classifier.hpp
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

#include <string>
#include <vector>

#include "pog/corpus.hpp"
#include "pog/nn.hpp"

namespace pog {

struct ClassifierConfig {
  int max_len = 32;
  Eigen::Index embed_dim = 100;
  std::vector<Eigen::Index> kernel_widths = {2, 3, 4, 5};
  Eigen::Index feature_maps = 128;
  Eigen::Index hidden = 512;
  int hidden_layers = 3;
  Scalar dropout = 0.5;
  int epochs = 30;
  int batch_size = 64;
  Scalar lr = 1e-3;
  Scalar alpha = 1.0;
  // Source of the batches that feed the entropy term:
  // none | pseudo_ood | perturb | mix
  std::string er_source = "none";
  Scalar perturb_rate = 0.5;
};

struct PredictedDistribution {
  Vector probs;
};

// Convolutional intent classifier over a fixed vocabulary and label set.
struct IntentClassifier {
  ClassifierConfig cfg;
  Vocabulary vocab;
  std::vector<std::string> label_names;
  nn::TextCnn net;

  IntentClassifier() = default;
  IntentClassifier(const ClassifierConfig& config, Vocabulary v,
                   std::vector<std::string> labels, RandomSource& rng);

  int num_classes() const { return static_cast<int>(label_names.size()); }
};

PredictedDistribution predict(IntentClassifier& clf, const TokenSequence& x);
// One row of class probabilities per sequence; deterministic (no dropout).
Matrix predict_batch(IntentClassifier& clf,
                     const std::vector<TokenSequence>& xs);
// Penultimate-layer activations, one row per sequence.
Matrix features_batch(IntentClassifier& clf,
                      const std::vector<TokenSequence>& xs);

Scalar detection_score(const PredictedDistribution& dist);

// Shannon entropy in nats with 0*log 0 = 0.
Scalar shannon_entropy(const Vector& probs);

// Value-level loss surfaces (training uses the tape path internally).
Scalar cross_entropy_loss(IntentClassifier& clf,
                          const std::vector<TokenSequence>& xs,
                          const std::vector<int>& labels);
Scalar entropy_regularizer(IntentClassifier& clf,
                           const std::vector<TokenSequence>& xs);
Scalar total_loss(Scalar ce, Scalar ent, Scalar alpha);

struct EpochLog {
  int epoch = 0;
  Scalar ce = 0.0;
  Scalar er = 0.0;
  Scalar val_acc = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  Scalar best_val_acc = 0.0;
};

// Trains in place. `pseudo_texts` supplies the pseudo_ood ER source; the
// perturb and mix sources are derived from the bundle. Keeps the best
// parameters by validation accuracy.
TrainLog train_classifier(IntentClassifier& clf, const DatasetBundle& bundle,
                          const std::vector<Tokens>& pseudo_texts,
                          RandomSource& rng);

void save_classifier(const IntentClassifier& clf, const std::string& path,
                     const std::string& config_echo = "");
IntentClassifier load_classifier(const std::string& path);

void save_train_log(const TrainLog& log, const std::string& path);

}  // namespace pog

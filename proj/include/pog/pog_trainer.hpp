// pog_trainer.hpp
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

#include "pog/aux_classifier.hpp"
#include "pog/autoencoder.hpp"
#include "pog/corpus.hpp"
#include "pog/latent_gan.hpp"

namespace pog {

struct PogConfig {
  std::string mode = "pog";  // pog | aepog
  int epochs = 80;
  int batch_size = 64;
  int max_len = 32;

  Eigen::Index embed_dim = 100;
  Eigen::Index hidden = 100;  // latent dimension shared by all components
  Scalar noise_std = 1.0;
  Scalar lr_ae = 1e-3;

  Eigen::Index gan_hidden = 512;
  Scalar gp_coeff = 10.0;
  Scalar lr_adv = 1e-4;

  // AC mirrors the intent classifier's architecture.
  std::vector<Eigen::Index> ac_kernel_widths = {2, 3, 4, 5};
  Eigen::Index ac_feature_maps = 128;
  Eigen::Index ac_hidden = 512;
  int ac_hidden_layers = 3;
  Scalar ac_dropout = 0.5;
  Scalar lr_ac = 1e-3;

  Scalar t_min = 0.1;
  bool dedup_samples = false;
};

// The composite generation model: autoencoder, latent GAN, auxiliary
// classifier and the temperature schedule they were trained under.
struct PogModel {
  PogConfig cfg;
  TextAutoencoder ae;  // owns the generator vocabulary
  LatentGan gan;
  AuxClassifier ac;
  TemperatureSchedule schedule;
  std::vector<std::string> label_names;

  const Vocabulary& vocab() const { return ae.vocab; }
};

struct PogIterLog {
  long iter = 0;
  Scalar rec = 0.0;
  Scalar ac_ce = 0.0;
  Scalar d_loss = 0.0;
  Scalar gp = 0.0;
  Scalar g_adv = 0.0;
  Scalar g_ent = 0.0;
  Scalar rec_mix = 0.0;  // aepog only
  Scalar d_mix = 0.0;    // aepog only
};

struct PogTrainResult {
  PogModel model;
  std::vector<PogIterLog> log;
  // Update-event names of the first iteration, for order assertions.
  std::vector<std::string> first_iter_trace;
  long updates_ae = 0, updates_ac = 0, updates_d = 0, updates_g = 0;
};

PogTrainResult train_pog(const DatasetBundle& bundle, const PogConfig& cfg,
                         std::uint64_t seed);
PogTrainResult train_aepog(const DatasetBundle& bundle, const PogConfig& cfg,
                           std::uint64_t seed);

// Draws pseudo-OOD utterances from a trained model; empty decodes are redrawn
// up to 10 times each.
std::vector<TokenSequence> sample_pseudo_ood(PogModel& model, int n,
                                             RandomSource& rng);

std::vector<Tokens> sequences_to_tokens(const std::vector<TokenSequence>& seqs,
                                        const Vocabulary& vocab);

void save_pog(const PogModel& model, const std::string& path,
              const std::string& config_echo = "");
PogModel load_pog(const std::string& path);

void save_pog_log(const std::vector<PogIterLog>& log, const std::string& path);

}  // namespace pog

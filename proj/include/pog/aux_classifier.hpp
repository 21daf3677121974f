// aux_classifier.hpp
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

#include "pog/autoencoder.hpp"
#include "pog/classifier.hpp"
#include "pog/latent_gan.hpp"
#include "pog/nn.hpp"

namespace pog {

// Temperature decays linearly from t0 to t_min over total_steps, then clamps.
struct TemperatureSchedule {
  Scalar t0 = 1.0;
  Scalar t_min = 0.1;
  long total_steps = 1;
  long step = 0;
};

Scalar temperature_at(const TemperatureSchedule& schedule, long step);

// Intent classifier over decoded utterances. Same convolutional architecture
// as the main classifier but reads per-step probability vectors, embedding
// each step as the probability-weighted average of word embeddings.
struct AuxClassifier {
  nn::TextCnn net;
  int max_len = 32;

  AuxClassifier() = default;
  AuxClassifier(const nn::TextCnnConfig& config, int max_len_,
                RandomSource& rng);
};

// Logits from T soft steps of B rows each.
ad::Var ac_logits_soft(ad::Tape& tape, nn::LeafMap& lm, AuxClassifier& ac,
                       std::span<const ad::Var> steps,
                       RandomSource* dropout_rng);

PredictedDistribution ac_forward(AuxClassifier& ac, const SoftSequence& s);

// Value-level Eq-style surface: mean -log P(y_i | soft reconstruction).
Scalar ac_ce_loss(AuxClassifier& ac, const std::vector<SoftSequence>& recons,
                  const std::vector<int>& labels);

// One AC update on a batch of detached soft reconstructions. `steps` holds T
// matrices of B x V step probabilities.
Scalar ac_train_step(AuxClassifier& ac, const std::vector<Matrix>& steps,
                     const std::vector<int>& labels,
                     const nn::AdamConfig& adam, RandomSource& dropout_rng);

// Mean -H(AC(decode_soft(G(eps)))): the regularizer that pushes generated
// utterances toward indistinguishable intent. Value in [-ln m, 0].
Scalar generator_entropy_loss(AuxClassifier& ac, LatentGan& gan,
                              DecoderParams& dec, const Matrix& eps_batch,
                              Scalar temperature, int max_steps);

// Same loss with one Adam update applied to the generator only; the decoder
// and AC stay frozen.
Scalar generator_entropy_step(AuxClassifier& ac, LatentGan& gan,
                              DecoderParams& dec, const Matrix& eps_batch,
                              Scalar temperature, int max_steps,
                              const nn::AdamConfig& adam);

}  // namespace pog

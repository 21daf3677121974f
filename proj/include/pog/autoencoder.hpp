// autoencoder.hpp
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

#include <vector>

#include "pog/corpus.hpp"
#include "pog/nn.hpp"

namespace pog {

struct AutoencoderConfig {
  Eigen::Index embed_dim = 100;
  Eigen::Index hidden = 100;  // latent dimension h
  int max_len = 32;
  Scalar noise_std = 1.0;
  int epochs = 30;
  int batch_size = 64;
  Scalar lr = 1e-3;
};

struct EncoderParams {
  nn::Param embed;  // V x d
  nn::LstmParams lstm;

  EncoderParams() = default;
  EncoderParams(Eigen::Index vocab, Eigen::Index embed_dim, Eigen::Index h,
                RandomSource& rng);
  nn::ParamRefs params();
};

struct DecoderParams {
  nn::Param embed;  // V x d
  nn::LstmParams lstm;
  nn::Dense out;  // h -> V

  DecoderParams() = default;
  DecoderParams(Eigen::Index vocab, Eigen::Index embed_dim, Eigen::Index h,
                RandomSource& rng);
  nn::ParamRefs params();
};

// Per-timestep probability vectors; row layout matches TokenSequence
// (a BOS one-hot first, PAD one-hots after the stop position).
struct SoftSequence {
  Matrix steps;   // T x V, each row sums to 1
  int stop = 0;   // first row whose argmax is EOS, plus one; else T
};

struct TextAutoencoder {
  AutoencoderConfig cfg;
  Vocabulary vocab;
  EncoderParams enc;
  DecoderParams dec;

  TextAutoencoder() = default;
  TextAutoencoder(const AutoencoderConfig& config, Vocabulary v,
                  RandomSource& rng);
};

// ---- tape-level pieces (shared by training loops) --------------------------

// Final masked hidden state, one row per sequence.
ad::Var encode_batch(ad::Tape& tape, nn::LeafMap& lm, EncoderParams& enc,
                     const std::vector<TokenSequence>& batch);

// Teacher-forced mean per-token NLL of `batch` decoded from `codes`.
ad::Var decoder_nll(ad::Tape& tape, nn::LeafMap& lm, DecoderParams& dec,
                    ad::Var codes, const std::vector<TokenSequence>& batch);

struct SoftDecodeBatch {
  std::vector<ad::Var> steps;  // T vars, each B x V; differentiable
  std::vector<int> stop;       // per row
};

// Autoregressive soft decoding: each step emits softmax(logits / temperature)
// and feeds back the probability-weighted embedding average. Rows after a
// row's stop position are constant PAD one-hots.
SoftDecodeBatch decode_soft_batch(ad::Tape& tape, nn::LeafMap& lm,
                                  DecoderParams& dec, ad::Var codes,
                                  Scalar temperature, int max_steps);

// ---- value-level surface ----------------------------------------------------

Vector encode(TextAutoencoder& ae, const TokenSequence& x);
Matrix encode_values(TextAutoencoder& ae, const std::vector<TokenSequence>& xs);

// Mean per-token NLL with Gaussian noise on the codes (training objective).
Scalar reconstruction_loss(TextAutoencoder& ae,
                           const std::vector<TokenSequence>& batch,
                           Scalar noise_std, RandomSource& rng);

// Noise-free per-token NLL of a single sequence under the current model.
Scalar sequence_nll(TextAutoencoder& ae, const TokenSequence& x);

SoftSequence decode_soft(TextAutoencoder& ae, const Vector& z,
                         Scalar temperature, int max_steps);

enum class DecodeMode { kGreedy, kSample };

TokenSequence decode_hard(TextAutoencoder& ae, const Vector& z,
                          DecodeMode mode, RandomSource* rng, int max_steps);

// One-hot rows for an encoded sequence; the exact soft counterpart of ids.
SoftSequence soft_from_sequence(const TokenSequence& seq, int vocab_size);

// ---- training ---------------------------------------------------------------

struct AeStepResult {
  Scalar loss = 0.0;
  Matrix noised_codes;  // codes actually fed to the decoder (z + eps)
};

// One reconstruction update on (enc, dec); returns the loss and the noised
// codes for downstream consumers.
AeStepResult ae_train_step(TextAutoencoder& ae,
                           const std::vector<TokenSequence>& batch,
                           Scalar noise_std, const nn::AdamConfig& adam,
                           RandomSource& noise_rng);

// Standalone training (reconstruction-score baseline); returns per-epoch
// mean losses.
std::vector<Scalar> train_autoencoder(TextAutoencoder& ae,
                                      const std::vector<TokenSequence>& train,
                                      RandomSource& rng);

void save_autoencoder(const TextAutoencoder& ae, const std::string& path);
TextAutoencoder load_autoencoder(const std::string& path);

}  // namespace pog

// latent_gan.hpp
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

#include "pog/nn.hpp"

namespace pog {

struct LatentGanConfig {
  Eigen::Index latent_dim = 100;  // matches the autoencoder hidden size
  Eigen::Index hidden = 512;
  int layers = 4;
  Scalar leaky_slope = 0.2;
  Scalar gp_coeff = 10.0;
  Scalar lr = 1e-4;
  Scalar beta1 = 0.5;
  Scalar beta2 = 0.9;
};

// Noise-to-code generator and code critic, both plain MLP stacks.
struct LatentGan {
  LatentGanConfig cfg;
  nn::Mlp generator;      // h -> ... -> h
  nn::Mlp discriminator;  // h -> ... -> 1 (no squashing)

  LatentGan() = default;
  LatentGan(const LatentGanConfig& config, RandomSource& rng);

  nn::AdamConfig adam() const {
    return nn::AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8};
  }
};

// Deterministic map from noise rows to code rows.
Matrix generate_code(LatentGan& gan, const Matrix& eps);

// Mean of -D(G(eps)) over the batch.
Scalar generator_loss(LatentGan& gan, const Matrix& eps_batch);

// Mean D(G(eps)) - mean D(real).
Scalar discriminator_loss(LatentGan& gan, const Matrix& eps_batch,
                          const Matrix& real_codes);

// Mean (|grad_x D(x_interp)|_2 - 1)^2 over per-pair uniform interpolates.
Scalar gradient_penalty(LatentGan& gan, const Matrix& real_codes,
                        const Matrix& fake_codes, RandomSource& rng);

// Losses of the most recent critic/generator step, for logging.
struct GanStepLosses {
  Scalar d_loss = 0.0;
  Scalar gp = 0.0;
  Scalar g_adv = 0.0;
};

// One update of the critic on L_d + gp_coeff * L_gp. Fake and real codes are
// treated as constants; only the critic moves.
GanStepLosses critic_step(LatentGan& gan, const Matrix& real_codes,
                          const Matrix& eps_batch, RandomSource& gp_rng);

// One adversarial update of the generator on L_g; the critic is frozen.
Scalar generator_adversarial_step(LatentGan& gan, const Matrix& eps_batch);

// Tape-level forwards shared with the entropy-regularization step.
ad::Var generator_forward(ad::Tape& tape, nn::LeafMap& lm, LatentGan& gan,
                          ad::Var eps);
ad::Var discriminator_forward(ad::Tape& tape, nn::LeafMap& lm, LatentGan& gan,
                              ad::Var codes);

}  // namespace pog

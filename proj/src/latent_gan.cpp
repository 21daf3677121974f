// latent_gan.cpp
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

#include "pog/latent_gan.hpp"

#include <cmath>
#include <stdexcept>

#include "pog/errors.hpp"

namespace pog {

using ad::Tape;
using ad::Var;

namespace {

std::vector<Eigen::Index> mlp_dims(Eigen::Index in, Eigen::Index hidden,
                                   int layers, Eigen::Index out) {
  std::vector<Eigen::Index> dims{in};
  for (int i = 0; i < layers - 1; ++i) dims.push_back(hidden);
  dims.push_back(out);
  return dims;
}

}  // namespace

LatentGan::LatentGan(const LatentGanConfig& config, RandomSource& rng)
    : cfg(config),
      generator("gen",
                mlp_dims(config.latent_dim, config.hidden, config.layers,
                         config.latent_dim),
                config.leaky_slope, rng),
      discriminator("disc",
                    mlp_dims(config.latent_dim, config.hidden, config.layers, 1),
                    config.leaky_slope, rng) {}

Var generator_forward(Tape& tape, nn::LeafMap& lm, LatentGan& gan, Var eps) {
  if (eps.cols() != gan.cfg.latent_dim)
    throw std::invalid_argument("generator: noise dimension mismatch");
  return nn::mlp_forward(tape, lm, gan.generator, eps);
}

Var discriminator_forward(Tape& tape, nn::LeafMap& lm, LatentGan& gan,
                          Var codes) {
  if (codes.cols() != gan.cfg.latent_dim)
    throw std::invalid_argument("discriminator: code dimension mismatch");
  return nn::mlp_forward(tape, lm, gan.discriminator, codes);
}

Matrix generate_code(LatentGan& gan, const Matrix& eps) {
  Tape tape;
  nn::LeafMap lm(tape);
  return generator_forward(tape, lm, gan, ad::constant(tape, eps)).value();
}

Scalar generator_loss(LatentGan& gan, const Matrix& eps_batch) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var fake = generator_forward(tape, lm, gan, ad::constant(tape, eps_batch));
  Var d = discriminator_forward(tape, lm, gan, fake);
  return ad::mean(ad::neg(d)).scalar();
}

Scalar discriminator_loss(LatentGan& gan, const Matrix& eps_batch,
                          const Matrix& real_codes) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var fake = generator_forward(tape, lm, gan, ad::constant(tape, eps_batch));
  Var d_fake = discriminator_forward(tape, lm, gan, fake);
  Var d_real =
      discriminator_forward(tape, lm, gan, ad::constant(tape, real_codes));
  return ad::sub(ad::mean(d_fake), ad::mean(d_real)).scalar();
}

namespace {

// Builds the penalty expression on an existing tape so callers can also take
// gradients through it.
Var gradient_penalty_expr(Tape& tape, nn::LeafMap& lm, LatentGan& gan,
                          const Matrix& real_codes, const Matrix& fake_codes,
                          RandomSource& rng) {
  if (real_codes.rows() != fake_codes.rows())
    throw std::invalid_argument("gradient_penalty: batch size mismatch");
  Matrix interp(real_codes.rows(), real_codes.cols());
  for (Eigen::Index i = 0; i < interp.rows(); ++i) {
    Scalar u = rng.uniform();
    interp.row(i) = u * real_codes.row(i) + (1.0 - u) * fake_codes.row(i);
  }
  Var x_hat = tape.leaf(std::move(interp));
  Var d = discriminator_forward(tape, lm, gan, x_hat);
  std::array<Var, 1> wrt{x_hat};
  // Rows are independent, so one backward from the sum yields per-sample
  // input gradients.
  Var grads = tape.gradients(ad::sum(d), wrt)[0];
  Var norms = ad::sqrt(ad::rowwise_sum(ad::mul(grads, grads)));
  Var excess = ad::axpb(norms, 1.0, -1.0);
  return ad::mean(ad::mul(excess, excess));
}

}  // namespace

Scalar gradient_penalty(LatentGan& gan, const Matrix& real_codes,
                        const Matrix& fake_codes, RandomSource& rng) {
  Tape tape;
  nn::LeafMap lm(tape);
  return gradient_penalty_expr(tape, lm, gan, real_codes, fake_codes, rng)
      .scalar();
}

GanStepLosses critic_step(LatentGan& gan, const Matrix& real_codes,
                          const Matrix& eps_batch, RandomSource& gp_rng) {
  Matrix fake_codes = generate_code(gan, eps_batch);

  Tape tape;
  nn::LeafMap lm(tape);
  Var d_fake =
      discriminator_forward(tape, lm, gan, ad::constant(tape, fake_codes));
  Var d_real =
      discriminator_forward(tape, lm, gan, ad::constant(tape, real_codes));
  Var d_loss = ad::sub(ad::mean(d_fake), ad::mean(d_real));
  Var gp = gradient_penalty_expr(tape, lm, gan, real_codes, fake_codes, gp_rng);
  Var loss = ad::add(d_loss, ad::axpb(gp, gan.cfg.gp_coeff, 0.0));

  GanStepLosses out;
  out.d_loss = d_loss.scalar();
  out.gp = gp.scalar();
  if (!std::isfinite(out.d_loss) || !std::isfinite(out.gp))
    throw DivergenceError("critic loss is not finite");
  nn::step_params(gan.adam(), tape, lm, loss, gan.discriminator.params());
  return out;
}

Scalar generator_adversarial_step(LatentGan& gan, const Matrix& eps_batch) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var fake = generator_forward(tape, lm, gan, ad::constant(tape, eps_batch));
  Var d = discriminator_forward(tape, lm, gan, fake);
  Var loss = ad::mean(ad::neg(d));
  Scalar value = loss.scalar();
  if (!std::isfinite(value)) throw DivergenceError("generator loss is not finite");
  nn::step_params(gan.adam(), tape, lm, loss, gan.generator.params());
  return value;
}

}  // namespace pog

// aux_classifier.cpp
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

#include "pog/aux_classifier.hpp"

#include <cmath>
#include <stdexcept>

#include "pog/errors.hpp"

namespace pog {

using ad::Tape;
using ad::Var;

Scalar temperature_at(const TemperatureSchedule& schedule, long step) {
  if (schedule.t_min <= 0.0)
    throw std::invalid_argument("temperature schedule: t_min must be > 0");
  if (step >= schedule.total_steps) return schedule.t_min;
  if (step < 0) return schedule.t0;
  Scalar frac = static_cast<Scalar>(step) /
                static_cast<Scalar>(schedule.total_steps);
  return schedule.t0 + (schedule.t_min - schedule.t0) * frac;
}

AuxClassifier::AuxClassifier(const nn::TextCnnConfig& config, int max_len_,
                             RandomSource& rng)
    : net(config, rng), max_len(max_len_) {}

Var ac_logits_soft(Tape& tape, nn::LeafMap& lm, AuxClassifier& ac,
                   std::span<const Var> steps, RandomSource* dropout_rng) {
  if (steps.empty()) throw std::invalid_argument("ac: empty soft sequence");
  if (steps[0].cols() != ac.net.cfg.vocab_size)
    throw std::invalid_argument("ac: soft sequence vocabulary mismatch");
  Var stacked = ad::stack_timesteps(tape, steps);
  Var embedded = ad::matmul(stacked, lm(ac.net.embed));
  return nn::textcnn_logits_from_embedded(
      tape, lm, ac.net, embedded, static_cast<Eigen::Index>(steps.size()),
      dropout_rng);
}

PredictedDistribution ac_forward(AuxClassifier& ac, const SoftSequence& s) {
  Tape tape;
  nn::LeafMap lm(tape);
  std::vector<Var> steps;
  for (Eigen::Index t = 0; t < s.steps.rows(); ++t)
    steps.push_back(ad::constant(tape, s.steps.row(t)));
  Var logits = ac_logits_soft(tape, lm, ac, steps, nullptr);
  Matrix probs = ad::softmax_rows(logits).value();
  return PredictedDistribution{probs.row(0).transpose()};
}

Scalar ac_ce_loss(AuxClassifier& ac, const std::vector<SoftSequence>& recons,
                  const std::vector<int>& labels) {
  if (recons.size() != labels.size())
    throw std::invalid_argument("ac_ce_loss: labels missing");
  Scalar total = 0.0;
  for (size_t i = 0; i < recons.size(); ++i) {
    PredictedDistribution dist = ac_forward(ac, recons[i]);
    int y = labels[i];
    if (y < 0 || y >= dist.probs.size())
      throw std::invalid_argument("ac_ce_loss: label out of range");
    total += -std::log(dist.probs(y));
  }
  return total / static_cast<Scalar>(recons.size());
}

Scalar ac_train_step(AuxClassifier& ac, const std::vector<Matrix>& steps,
                     const std::vector<int>& labels,
                     const nn::AdamConfig& adam, RandomSource& dropout_rng) {
  Tape tape;
  nn::LeafMap lm(tape);
  std::vector<Var> step_vars;
  for (const Matrix& s : steps) step_vars.push_back(ad::constant(tape, s));
  Var logits = ac_logits_soft(tape, lm, ac, step_vars, &dropout_rng);
  Var loss = nn::nll_loss(tape, logits, labels);
  Scalar value = loss.scalar();
  if (!std::isfinite(value))
    throw DivergenceError("auxiliary classifier loss is not finite");
  nn::step_params(adam, tape, lm, loss, ac.net.params());
  return value;
}

namespace {

Scalar entropy_objective(AuxClassifier& ac, LatentGan& gan, DecoderParams& dec,
                         const Matrix& eps_batch, Scalar temperature,
                         int max_steps, const nn::AdamConfig* adam) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var eps = ad::constant(tape, eps_batch);
  Var codes = generator_forward(tape, lm, gan, eps);
  SoftDecodeBatch soft =
      decode_soft_batch(tape, lm, dec, codes, temperature, max_steps);
  Var logits = ac_logits_soft(tape, lm, ac, soft.steps, nullptr);
  Var loss = nn::mean_negative_entropy(tape, logits);
  Scalar value = loss.scalar();
  if (!std::isfinite(value))
    throw DivergenceError("generator entropy loss is not finite");
  if (adam) nn::step_params(*adam, tape, lm, loss, gan.generator.params());
  return value;
}

}  // namespace

Scalar generator_entropy_loss(AuxClassifier& ac, LatentGan& gan,
                              DecoderParams& dec, const Matrix& eps_batch,
                              Scalar temperature, int max_steps) {
  return entropy_objective(ac, gan, dec, eps_batch, temperature, max_steps,
                           nullptr);
}

Scalar generator_entropy_step(AuxClassifier& ac, LatentGan& gan,
                              DecoderParams& dec, const Matrix& eps_batch,
                              Scalar temperature, int max_steps,
                              const nn::AdamConfig& adam) {
  return entropy_objective(ac, gan, dec, eps_batch, temperature, max_steps,
                           &adam);
}

}  // namespace pog

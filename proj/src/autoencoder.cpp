// autoencoder.cpp
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

#include "pog/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pog/errors.hpp"
#include "pog/serialize.hpp"

namespace pog {

using ad::Tape;
using ad::Var;

EncoderParams::EncoderParams(Eigen::Index vocab, Eigen::Index embed_dim,
                             Eigen::Index h, RandomSource& rng)
    : embed("enc.embed", rng.uniform_matrix(vocab, embed_dim, -0.1, 0.1)),
      lstm("enc.lstm", embed_dim, h, rng) {}

nn::ParamRefs EncoderParams::params() {
  nn::ParamRefs r{&embed};
  for (nn::Param* p : lstm.params()) r.push_back(p);
  return r;
}

DecoderParams::DecoderParams(Eigen::Index vocab, Eigen::Index embed_dim,
                             Eigen::Index h, RandomSource& rng)
    : embed("dec.embed", rng.uniform_matrix(vocab, embed_dim, -0.1, 0.1)),
      lstm("dec.lstm", embed_dim, h, rng),
      out("dec.out", h, vocab, rng) {}

nn::ParamRefs DecoderParams::params() {
  nn::ParamRefs r{&embed};
  for (nn::Param* p : lstm.params()) r.push_back(p);
  r.push_back(&out.w);
  r.push_back(&out.b);
  return r;
}

TextAutoencoder::TextAutoencoder(const AutoencoderConfig& config, Vocabulary v,
                                 RandomSource& rng)
    : cfg(config),
      vocab(std::move(v)),
      enc(vocab.size(), config.embed_dim, config.hidden, rng),
      dec(vocab.size(), config.embed_dim, config.hidden, rng) {}

namespace {

// Decoding never emits structural tokens; EOS stays eligible so sequences
// can terminate.
Matrix special_logit_mask(Eigen::Index vocab) {
  Matrix mask = Matrix::Zero(1, vocab);
  mask(0, Vocabulary::kPad) = -1e30;
  mask(0, Vocabulary::kUnk) = -1e30;
  mask(0, Vocabulary::kBos) = -1e30;
  return mask;
}

int max_length(const std::vector<TokenSequence>& batch) {
  int m = 0;
  for (const TokenSequence& s : batch) m = std::max(m, s.length);
  return m;
}

std::vector<int> ids_at_step(const std::vector<TokenSequence>& batch, int t) {
  std::vector<int> ids(batch.size(), Vocabulary::kPad);
  for (size_t b = 0; b < batch.size(); ++b)
    if (t < batch[b].max_len()) ids[b] = batch[b].ids[static_cast<size_t>(t)];
  return ids;
}

}  // namespace

Var encode_batch(Tape& tape, nn::LeafMap& lm, EncoderParams& enc,
                 const std::vector<TokenSequence>& batch) {
  Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
  Eigen::Index h = enc.lstm.hidden();
  int steps = max_length(batch);
  nn::LstmState st{tape.leaf(Matrix::Zero(bsz, h)),
                   tape.leaf(Matrix::Zero(bsz, h))};
  for (int t = 0; t < steps; ++t) {
    Var x = ad::gather_rows(lm(enc.embed), ids_at_step(batch, t));
    nn::LstmState next = nn::lstm_step(tape, lm, enc.lstm, x, st);
    // Rows already past their EOS carry the previous state forward.
    Matrix live(bsz, 1);
    for (Eigen::Index b = 0; b < bsz; ++b)
      live(b, 0) = t < batch[static_cast<size_t>(b)].length ? 1.0 : 0.0;
    Var live_h = ad::broadcast_cols(tape.leaf(live), h);
    Var dead_h = ad::axpb(live_h, -1.0, 1.0);
    st.h = ad::add(ad::mul(next.h, live_h), ad::mul(st.h, dead_h));
    st.c = ad::add(ad::mul(next.c, live_h), ad::mul(st.c, dead_h));
  }
  return st.h;
}

Var decoder_nll(Tape& tape, nn::LeafMap& lm, DecoderParams& dec, Var codes,
                const std::vector<TokenSequence>& batch) {
  Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
  Eigen::Index h = dec.lstm.hidden();
  int steps = max_length(batch) - 1;  // logits at step t predict ids[t + 1]

  nn::LstmState st{codes, tape.leaf(Matrix::Zero(bsz, h))};
  Var total;
  double token_count = 0.0;
  for (int t = 0; t < steps; ++t) {
    Var x = ad::gather_rows(lm(dec.embed), ids_at_step(batch, t));
    st = nn::lstm_step(tape, lm, dec.lstm, x, st);
    Var logits = nn::dense_forward(lm, dec.out, st.h);
    Var lsm = ad::log_softmax_rows(logits);
    std::vector<int> targets = ids_at_step(batch, t + 1);
    Var picked = ad::pick_per_row(lsm, targets);
    Matrix mask(bsz, 1);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      bool in_range = t + 1 < batch[static_cast<size_t>(b)].length;
      mask(b, 0) = in_range ? 1.0 : 0.0;
      token_count += in_range ? 1.0 : 0.0;
    }
    Var masked = ad::mul(picked, tape.leaf(mask));
    Var step_sum = ad::sum(masked);
    total = total.valid() ? ad::add(total, step_sum) : step_sum;
  }
  if (!total.valid() || token_count == 0.0)
    throw std::invalid_argument("decoder_nll: batch has no target tokens");
  return ad::axpb(total, -1.0 / token_count, 0.0);
}

SoftDecodeBatch decode_soft_batch(Tape& tape, nn::LeafMap& lm,
                                  DecoderParams& dec, Var codes,
                                  Scalar temperature, int max_steps) {
  if (temperature <= 0.0)
    throw std::invalid_argument("decode_soft: temperature must be > 0");
  Eigen::Index bsz = codes.rows();
  Eigen::Index h = dec.lstm.hidden();
  Eigen::Index v = dec.embed.value.rows();

  Matrix bos = Matrix::Zero(bsz, v);
  bos.col(Vocabulary::kBos).setOnes();

  SoftDecodeBatch out;
  out.steps.push_back(ad::constant(tape, bos));
  out.stop.assign(static_cast<size_t>(bsz), max_steps);

  nn::LstmState st{codes, tape.leaf(Matrix::Zero(bsz, h))};
  Var feedback = out.steps[0];
  Var logit_mask = ad::constant(tape, special_logit_mask(v));
  std::vector<Var> raw_steps;
  for (int t = 1; t < max_steps; ++t) {
    Var x = ad::matmul(feedback, lm(dec.embed));
    st = nn::lstm_step(tape, lm, dec.lstm, x, st);
    Var logits = ad::add_rowvec(nn::dense_forward(lm, dec.out, st.h),
                                logit_mask);
    Var probs = ad::softmax_rows(ad::axpb(logits, 1.0 / temperature, 0.0));
    raw_steps.push_back(probs);
    feedback = probs;
  }

  // Stop at the first EOS argmax; later rows become constant PAD one-hots.
  for (Eigen::Index b = 0; b < bsz; ++b) {
    for (size_t t = 0; t < raw_steps.size(); ++t) {
      Eigen::Index arg;
      raw_steps[t].value().row(b).maxCoeff(&arg);
      if (arg == Vocabulary::kEos) {
        out.stop[static_cast<size_t>(b)] = static_cast<int>(t) + 2;
        break;
      }
    }
  }
  for (size_t t = 0; t < raw_steps.size(); ++t) {
    Matrix live(bsz, 1);
    Matrix pad_rows = Matrix::Zero(bsz, v);
    bool any_dead = false;
    for (Eigen::Index b = 0; b < bsz; ++b) {
      bool alive = static_cast<int>(t) + 2 <= out.stop[static_cast<size_t>(b)];
      live(b, 0) = alive ? 1.0 : 0.0;
      if (!alive) {
        pad_rows(b, Vocabulary::kPad) = 1.0;
        any_dead = true;
      }
    }
    if (!any_dead) {
      out.steps.push_back(raw_steps[t]);
      continue;
    }
    Var live_mask = ad::broadcast_cols(tape.leaf(live), v);
    out.steps.push_back(ad::add(ad::mul(raw_steps[t], live_mask),
                                ad::constant(tape, pad_rows)));
  }
  return out;
}

Matrix encode_values(TextAutoencoder& ae, const std::vector<TokenSequence>& xs) {
  Tape tape;
  nn::LeafMap lm(tape);
  return encode_batch(tape, lm, ae.enc, xs).value();
}

Vector encode(TextAutoencoder& ae, const TokenSequence& x) {
  return encode_values(ae, {x}).row(0).transpose();
}

Scalar reconstruction_loss(TextAutoencoder& ae,
                           const std::vector<TokenSequence>& batch,
                           Scalar noise_std, RandomSource& rng) {
  if (noise_std < 0.0)
    throw std::invalid_argument("reconstruction_loss: noise_std must be >= 0");
  Tape tape;
  nn::LeafMap lm(tape);
  Var codes = encode_batch(tape, lm, ae.enc, batch);
  if (noise_std > 0.0) {
    Matrix eps = rng.normal_matrix(codes.rows(), codes.cols(), noise_std);
    codes = ad::add(codes, ad::constant(tape, std::move(eps)));
  }
  return decoder_nll(tape, lm, ae.dec, codes, batch).scalar();
}

Scalar sequence_nll(TextAutoencoder& ae, const TokenSequence& x) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var codes = encode_batch(tape, lm, ae.enc, {x});
  return decoder_nll(tape, lm, ae.dec, codes, {x}).scalar();
}

SoftSequence decode_soft(TextAutoencoder& ae, const Vector& z,
                         Scalar temperature, int max_steps) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var codes = ad::constant(tape, z.transpose());
  SoftDecodeBatch batch =
      decode_soft_batch(tape, lm, ae.dec, codes, temperature, max_steps);
  SoftSequence out;
  out.steps.resize(static_cast<Eigen::Index>(batch.steps.size()),
                   ae.vocab.size());
  for (size_t t = 0; t < batch.steps.size(); ++t)
    out.steps.row(static_cast<Eigen::Index>(t)) = batch.steps[t].value().row(0);
  out.stop = batch.stop[0];
  return out;
}

TokenSequence decode_hard(TextAutoencoder& ae, const Vector& z,
                          DecodeMode mode, RandomSource* rng, int max_steps) {
  Tape tape;
  nn::LeafMap lm(tape);
  Eigen::Index h = ae.cfg.hidden;
  Eigen::Index v = ae.vocab.size();

  TokenSequence seq;
  seq.ids.assign(static_cast<size_t>(max_steps), Vocabulary::kPad);
  seq.ids[0] = Vocabulary::kBos;

  nn::LstmState st{ad::constant(tape, z.transpose()),
                   tape.leaf(Matrix::Zero(1, h))};
  Var logit_mask = ad::constant(tape, special_logit_mask(v));
  int prev = Vocabulary::kBos;
  int pos = 1;
  while (pos < max_steps) {
    Var x = ad::gather_rows(lm(ae.dec.embed), {prev});
    st = nn::lstm_step(tape, lm, ae.dec.lstm, x, st);
    Var logits = ad::add_rowvec(nn::dense_forward(lm, ae.dec.out, st.h),
                                logit_mask);
    Matrix probs = ad::softmax_rows(logits).value();
    int chosen;
    if (mode == DecodeMode::kGreedy) {
      Eigen::Index arg;
      probs.row(0).maxCoeff(&arg);
      chosen = static_cast<int>(arg);
    } else {
      if (!rng) throw std::invalid_argument("decode_hard: sampling needs rng");
      Scalar u = rng->uniform();
      Scalar acc = 0.0;
      chosen = static_cast<int>(v) - 1;
      for (Eigen::Index j = 0; j < v; ++j) {
        acc += probs(0, j);
        if (u < acc) {
          chosen = static_cast<int>(j);
          break;
        }
      }
    }
    if (chosen == Vocabulary::kEos || pos == max_steps - 1) {
      seq.ids[static_cast<size_t>(pos)] = Vocabulary::kEos;
      ++pos;
      break;
    }
    seq.ids[static_cast<size_t>(pos)] = chosen;
    prev = chosen;
    ++pos;
  }
  seq.length = pos;
  return seq;
}

SoftSequence soft_from_sequence(const TokenSequence& seq, int vocab_size) {
  SoftSequence out;
  out.steps = Matrix::Zero(seq.max_len(), vocab_size);
  for (int t = 0; t < seq.max_len(); ++t)
    out.steps(t, seq.ids[static_cast<size_t>(t)]) = 1.0;
  out.stop = seq.length;
  return out;
}

AeStepResult ae_train_step(TextAutoencoder& ae,
                           const std::vector<TokenSequence>& batch,
                           Scalar noise_std, const nn::AdamConfig& adam,
                           RandomSource& noise_rng) {
  Tape tape;
  nn::LeafMap lm(tape);
  Var codes = encode_batch(tape, lm, ae.enc, batch);
  Var noised = codes;
  if (noise_std > 0.0) {
    Matrix eps =
        noise_rng.normal_matrix(codes.rows(), codes.cols(), noise_std);
    noised = ad::add(codes, ad::constant(tape, std::move(eps)));
  }
  Var loss = decoder_nll(tape, lm, ae.dec, noised, batch);

  AeStepResult res;
  res.loss = loss.scalar();
  res.noised_codes = noised.value();
  if (!std::isfinite(res.loss))
    throw DivergenceError("autoencoder reconstruction loss is not finite");

  nn::ParamRefs subset = ae.enc.params();
  for (nn::Param* p : ae.dec.params()) subset.push_back(p);
  nn::step_params(adam, tape, lm, loss, subset);
  return res;
}

std::vector<Scalar> train_autoencoder(TextAutoencoder& ae,
                                      const std::vector<TokenSequence>& train,
                                      RandomSource& rng) {
  if (train.empty()) throw ConfigError("autoencoder: empty training split");
  nn::AdamConfig adam;
  adam.lr = ae.cfg.lr;
  RandomSource batch_rng = rng.fork("batches");
  RandomSource noise_rng = rng.fork("noise");

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  size_t steps = (train.size() + static_cast<size_t>(ae.cfg.batch_size) - 1) /
                 static_cast<size_t>(ae.cfg.batch_size);

  std::vector<Scalar> epoch_losses;
  for (int epoch = 0; epoch < ae.cfg.epochs; ++epoch) {
    batch_rng.shuffle(order);
    Scalar total = 0.0;
    size_t cursor = 0;
    for (size_t s = 0; s < steps; ++s) {
      std::vector<TokenSequence> batch;
      for (int k = 0; k < ae.cfg.batch_size; ++k) {
        batch.push_back(train[order[cursor]]);
        cursor = (cursor + 1) % order.size();
      }
      total += ae_train_step(ae, batch, ae.cfg.noise_std, adam, noise_rng).loss;
    }
    epoch_losses.push_back(total / static_cast<Scalar>(steps));
  }
  return epoch_losses;
}

void save_autoencoder(const TextAutoencoder& ae, const std::string& path) {
  nlohmann::json j;
  j["kind"] = "autoencoder";
  j["config"] = {{"embed_dim", ae.cfg.embed_dim}, {"hidden", ae.cfg.hidden},
                 {"max_len", ae.cfg.max_len},     {"noise_std", ae.cfg.noise_std},
                 {"epochs", ae.cfg.epochs},       {"batch_size", ae.cfg.batch_size},
                 {"lr", ae.cfg.lr}};
  j["vocab"] = ae.vocab.id_to_token;
  j["min_count"] = ae.vocab.min_count;
  j["vocab_hash"] = ae.vocab.hash();
  auto& mut = const_cast<TextAutoencoder&>(ae);
  nn::ParamRefs all = mut.enc.params();
  for (nn::Param* p : mut.dec.params()) all.push_back(p);
  j["params"] = params_to_json(all);
  write_json_file(path, j);
}

TextAutoencoder load_autoencoder(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (j.at("kind") != "autoencoder")
    throw ConfigError("not an autoencoder checkpoint: " + path);
  AutoencoderConfig cfg;
  const auto& c = j.at("config");
  cfg.embed_dim = c.at("embed_dim").get<Eigen::Index>();
  cfg.hidden = c.at("hidden").get<Eigen::Index>();
  cfg.max_len = c.at("max_len").get<int>();
  cfg.noise_std = c.at("noise_std").get<Scalar>();
  cfg.epochs = c.at("epochs").get<int>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.lr = c.at("lr").get<Scalar>();

  Vocabulary vocab;
  vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
  vocab.min_count = j.at("min_count").get<int>();
  for (size_t i = 0; i < vocab.id_to_token.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);

  RandomSource init_rng(0);
  TextAutoencoder ae(cfg, std::move(vocab), init_rng);
  nn::ParamRefs all = ae.enc.params();
  for (nn::Param* p : ae.dec.params()) all.push_back(p);
  params_from_json(j.at("params"), all);
  if (j.at("vocab_hash").get<std::string>() != ae.vocab.hash())
    throw ConfigError("autoencoder checkpoint vocab hash mismatch");
  return ae;
}

}  // namespace pog

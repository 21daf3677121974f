// pog_trainer.cpp
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

#include "pog/pog_trainer.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "pog/errors.hpp"
#include "pog/serialize.hpp"

namespace pog {

using ad::Tape;
using ad::Var;

namespace {

struct IndexCycler {
  std::vector<size_t> order;
  size_t pos = 0;
  RandomSource* rng;

  IndexCycler(size_t n, RandomSource* r) : rng(r) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    rng->shuffle(order);
  }
  std::vector<size_t> next(size_t count) {
    std::vector<size_t> out;
    while (out.size() < count) {
      if (pos == order.size()) {
        rng->shuffle(order);
        pos = 0;
      }
      out.push_back(order[pos++]);
    }
    return out;
  }
};

nn::TextCnnConfig ac_net_config(const PogConfig& cfg, int vocab_size,
                                int num_classes) {
  nn::TextCnnConfig nc;
  nc.vocab_size = vocab_size;
  nc.embed_dim = cfg.embed_dim;
  nc.kernel_widths = cfg.ac_kernel_widths;
  nc.feature_maps = cfg.ac_feature_maps;
  nc.hidden = cfg.ac_hidden;
  nc.hidden_layers = cfg.ac_hidden_layers;
  nc.num_classes = num_classes;
  nc.dropout = cfg.ac_dropout;
  return nc;
}

PogModel build_model(const DatasetBundle& bundle, const PogConfig& cfg,
                     RandomSource& rng) {
  Vocabulary gen_vocab = build_vocab(bundle.ind_train, 1);

  AutoencoderConfig ae_cfg;
  ae_cfg.embed_dim = cfg.embed_dim;
  ae_cfg.hidden = cfg.hidden;
  ae_cfg.max_len = cfg.max_len;
  ae_cfg.noise_std = cfg.noise_std;
  ae_cfg.batch_size = cfg.batch_size;
  ae_cfg.lr = cfg.lr_ae;

  LatentGanConfig gan_cfg;
  gan_cfg.latent_dim = cfg.hidden;
  gan_cfg.hidden = cfg.gan_hidden;
  gan_cfg.gp_coeff = cfg.gp_coeff;
  gan_cfg.lr = cfg.lr_adv;

  PogModel model{
      cfg,
      TextAutoencoder(ae_cfg, gen_vocab, rng),
      LatentGan(gan_cfg, rng),
      AuxClassifier(ac_net_config(cfg, gen_vocab.size(), bundle.num_classes()),
                    cfg.max_len, rng),
      TemperatureSchedule{},
      bundle.label_names};
  model.schedule.t_min = cfg.t_min;
  return model;
}

// Alg. 1 step 5 / Alg. 2 reuse: soft-decode the given codes with the current
// decoder, detached from every parameter.
std::vector<Matrix> soft_decode_values(PogModel& model, const Matrix& codes,
                                       Scalar temperature) {
  Tape tape;
  nn::LeafMap lm(tape);
  SoftDecodeBatch soft =
      decode_soft_batch(tape, lm, model.ae.dec, ad::constant(tape, codes),
                        temperature, model.cfg.max_len);
  std::vector<Matrix> out;
  out.reserve(soft.steps.size());
  for (const Var& s : soft.steps) out.push_back(s.value());
  return out;
}

PogTrainResult train_impl(const DatasetBundle& bundle, const PogConfig& cfg,
                          std::uint64_t seed, bool use_mix) {
  if (bundle.ind_train.empty()) throw ConfigError("pog: empty ind_train split");
  if (use_mix && bundle.mix.empty())
    throw ConfigError("aepog requires a non-empty mix split");

  RandomSource root(seed);
  RandomSource init_rng = root.fork("init");
  RandomSource batch_rng = root.fork("batches");
  RandomSource mix_rng = root.fork("mix_batches");
  RandomSource noise_rng = root.fork("noise");
  RandomSource eps_rng = root.fork("eps");
  RandomSource gp_rng = root.fork("gp");
  RandomSource dropout_rng = root.fork("dropout");

  PogTrainResult result{build_model(bundle, cfg, init_rng), {}, {}, 0, 0, 0, 0};
  PogModel& model = result.model;

  std::vector<TokenSequence> train =
      encode_split(bundle.ind_train, model.vocab(), cfg.max_len);
  std::vector<TokenSequence> mix =
      use_mix ? encode_split(bundle.mix, model.vocab(), cfg.max_len)
              : std::vector<TokenSequence>{};

  size_t m = static_cast<size_t>(cfg.batch_size);
  long iters_per_epoch =
      static_cast<long>((train.size() + m - 1) / m);
  long total_iters = iters_per_epoch * cfg.epochs;
  model.schedule.total_steps = total_iters;

  IndexCycler ind_cycle(train.size(), &batch_rng);
  IndexCycler mix_cycle(use_mix ? mix.size() : 1, &mix_rng);

  nn::AdamConfig adam_ae;
  adam_ae.lr = cfg.lr_ae;
  nn::AdamConfig adam_ac;
  adam_ac.lr = cfg.lr_ac;
  nn::AdamConfig adam_adv = model.gan.adam();

  auto gather_batch = [](const std::vector<TokenSequence>& pool,
                         const std::vector<size_t>& pick) {
    std::vector<TokenSequence> out;
    out.reserve(pick.size());
    for (size_t i : pick) out.push_back(pool[i]);
    return out;
  };

  for (long iter = 0; iter < total_iters; ++iter) {
    PogIterLog entry;
    entry.iter = iter;
    Scalar temperature = temperature_at(model.schedule, iter);
    auto trace = [&](const char* tag) {
      if (iter == 0) result.first_iter_trace.push_back(tag);
    };

    // (1) autoencoder on labeled data, then the auxiliary classifier on the
    // soft reconstructions of the same (noised) codes.
    std::vector<size_t> pick = ind_cycle.next(m);
    std::vector<TokenSequence> batch = gather_batch(train, pick);
    std::vector<int> labels;
    for (size_t i : pick) labels.push_back(bundle.ind_train_labels[i]);

    AeStepResult ae_res =
        ae_train_step(model.ae, batch, cfg.noise_std, adam_ae, noise_rng);
    entry.rec = ae_res.loss;
    ++result.updates_ae;
    trace("ae");

    std::vector<Matrix> recon_steps =
        soft_decode_values(model, ae_res.noised_codes, temperature);
    entry.ac_ce =
        ac_train_step(model.ac, recon_steps, labels, adam_ac, dropout_rng);
    ++result.updates_ac;
    trace("ac");

    // (1b) autoencoder exposure to the unlabeled mixture.
    if (use_mix) {
      std::vector<TokenSequence> mix_batch =
          gather_batch(mix, mix_cycle.next(m));
      entry.rec_mix =
          ae_train_step(model.ae, mix_batch, cfg.noise_std, adam_ae, noise_rng)
              .loss;
      ++result.updates_ae;
      trace("ae_mix");
    }

    // (2) critic on fresh real codes vs generated codes.
    std::vector<TokenSequence> d_batch = gather_batch(train, ind_cycle.next(m));
    Matrix real = encode_values(model.ae, d_batch);
    Matrix eps = eps_rng.normal_matrix(static_cast<Eigen::Index>(m),
                                       cfg.hidden);
    GanStepLosses d_losses = critic_step(model.gan, real, eps, gp_rng);
    entry.d_loss = d_losses.d_loss;
    entry.gp = d_losses.gp;
    ++result.updates_d;
    trace("d");

    // (2b) critic exposure to codes of the unlabeled mixture.
    if (use_mix) {
      std::vector<TokenSequence> mix_batch =
          gather_batch(mix, mix_cycle.next(m));
      Matrix mix_real = encode_values(model.ae, mix_batch);
      Matrix mix_eps = eps_rng.normal_matrix(static_cast<Eigen::Index>(m),
                                             cfg.hidden);
      entry.d_mix = critic_step(model.gan, mix_real, mix_eps, gp_rng).d_loss;
      ++result.updates_d;
      trace("d_mix");
    }

    // (3) generator: adversarial update, then the entropy regularization
    // through soft decoding and the frozen AC.
    Matrix g_eps = eps_rng.normal_matrix(static_cast<Eigen::Index>(m),
                                         cfg.hidden);
    entry.g_adv = generator_adversarial_step(model.gan, g_eps);
    ++result.updates_g;
    trace("g_adv");
    entry.g_ent =
        generator_entropy_step(model.ac, model.gan, model.ae.dec, g_eps,
                               temperature, cfg.max_len, adam_adv);
    ++result.updates_g;
    trace("g_ent");

    model.schedule.step = iter + 1;
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace

PogTrainResult train_pog(const DatasetBundle& bundle, const PogConfig& cfg,
                         std::uint64_t seed) {
  if (cfg.mode != "pog")
    throw ConfigError("train_pog called with mode " + cfg.mode);
  return train_impl(bundle, cfg, seed, false);
}

PogTrainResult train_aepog(const DatasetBundle& bundle, const PogConfig& cfg,
                           std::uint64_t seed) {
  if (cfg.mode != "aepog")
    throw ConfigError("train_aepog called with mode " + cfg.mode);
  return train_impl(bundle, cfg, seed, true);
}

std::vector<TokenSequence> sample_pseudo_ood(PogModel& model, int n,
                                             RandomSource& rng) {
  if (n < 1) throw std::invalid_argument("sample_pseudo_ood: n must be >= 1");
  std::vector<TokenSequence> out;
  std::set<std::string> seen;
  for (int i = 0; i < n; ++i) {
    TokenSequence accepted;
    bool ok = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Matrix eps = rng.normal_matrix(1, model.cfg.hidden);
      Matrix code = generate_code(model.gan, eps);
      TokenSequence seq =
          decode_hard(model.ae, code.row(0).transpose(), DecodeMode::kSample,
                      &rng, model.cfg.max_len);
      if (seq.length <= 2) continue;  // immediate EOS
      if (model.cfg.dedup_samples) {
        std::string text = decode_text(seq, model.vocab());
        if (seen.count(text) && attempt + 1 < 10) continue;
        seen.insert(text);
      }
      accepted = seq;
      ok = true;
      break;
    }
    if (!ok)
      throw std::runtime_error(
          "degenerate decoder: 10 consecutive empty decodes");
    out.push_back(std::move(accepted));
  }
  return out;
}

std::vector<Tokens> sequences_to_tokens(const std::vector<TokenSequence>& seqs,
                                        const Vocabulary& vocab) {
  std::vector<Tokens> out;
  out.reserve(seqs.size());
  for (const TokenSequence& s : seqs) out.push_back(decode_tokens(s, vocab));
  return out;
}

namespace {

nlohmann::json pog_config_to_json(const PogConfig& cfg) {
  return {{"mode", cfg.mode},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"max_len", cfg.max_len},
          {"embed_dim", cfg.embed_dim},
          {"hidden", cfg.hidden},
          {"noise_std", cfg.noise_std},
          {"lr_ae", cfg.lr_ae},
          {"gan_hidden", cfg.gan_hidden},
          {"gp_coeff", cfg.gp_coeff},
          {"lr_adv", cfg.lr_adv},
          {"ac_kernel_widths", cfg.ac_kernel_widths},
          {"ac_feature_maps", cfg.ac_feature_maps},
          {"ac_hidden", cfg.ac_hidden},
          {"ac_hidden_layers", cfg.ac_hidden_layers},
          {"ac_dropout", cfg.ac_dropout},
          {"lr_ac", cfg.lr_ac},
          {"t_min", cfg.t_min},
          {"dedup_samples", cfg.dedup_samples}};
}

PogConfig pog_config_from_json(const nlohmann::json& j) {
  PogConfig cfg;
  cfg.mode = j.at("mode").get<std::string>();
  cfg.epochs = j.at("epochs").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<Eigen::Index>();
  cfg.hidden = j.at("hidden").get<Eigen::Index>();
  cfg.noise_std = j.at("noise_std").get<Scalar>();
  cfg.lr_ae = j.at("lr_ae").get<Scalar>();
  cfg.gan_hidden = j.at("gan_hidden").get<Eigen::Index>();
  cfg.gp_coeff = j.at("gp_coeff").get<Scalar>();
  cfg.lr_adv = j.at("lr_adv").get<Scalar>();
  cfg.ac_kernel_widths =
      j.at("ac_kernel_widths").get<std::vector<Eigen::Index>>();
  cfg.ac_feature_maps = j.at("ac_feature_maps").get<Eigen::Index>();
  cfg.ac_hidden = j.at("ac_hidden").get<Eigen::Index>();
  cfg.ac_hidden_layers = j.at("ac_hidden_layers").get<int>();
  cfg.ac_dropout = j.at("ac_dropout").get<Scalar>();
  cfg.lr_ac = j.at("lr_ac").get<Scalar>();
  cfg.t_min = j.at("t_min").get<Scalar>();
  cfg.dedup_samples = j.at("dedup_samples").get<bool>();
  return cfg;
}

}  // namespace

void save_pog(const PogModel& model, const std::string& path,
              const std::string& config_echo) {
  auto& mut = const_cast<PogModel&>(model);
  nlohmann::json j;
  j["kind"] = "pog";
  j["config"] = pog_config_to_json(model.cfg);
  j["vocab"] = model.vocab().id_to_token;
  j["min_count"] = model.vocab().min_count;
  j["vocab_hash"] = model.vocab().hash();
  j["label_names"] = model.label_names;
  j["schedule"] = {{"t0", model.schedule.t0},
                   {"t_min", model.schedule.t_min},
                   {"total_steps", model.schedule.total_steps},
                   {"step", model.schedule.step}};
  if (!config_echo.empty()) j["experiment_config"] = config_echo;
  j["params"] = {{"encoder", params_to_json(mut.ae.enc.params())},
                 {"decoder", params_to_json(mut.ae.dec.params())},
                 {"generator", params_to_json(mut.gan.generator.params())},
                 {"discriminator",
                  params_to_json(mut.gan.discriminator.params())},
                 {"ac", params_to_json(mut.ac.net.params())}};
  write_json_file(path, j);
}

PogModel load_pog(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (j.at("kind") != "pog") throw ConfigError("not a pog checkpoint: " + path);
  PogConfig cfg = pog_config_from_json(j.at("config"));

  DatasetBundle shell;
  shell.label_names = j.at("label_names").get<std::vector<std::string>>();
  // Rebuild the vocabulary exactly as stored.
  Vocabulary vocab;
  vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
  vocab.min_count = j.at("min_count").get<int>();
  for (size_t i = 0; i < vocab.id_to_token.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);

  AutoencoderConfig ae_cfg;
  ae_cfg.embed_dim = cfg.embed_dim;
  ae_cfg.hidden = cfg.hidden;
  ae_cfg.max_len = cfg.max_len;
  ae_cfg.noise_std = cfg.noise_std;
  ae_cfg.batch_size = cfg.batch_size;
  ae_cfg.lr = cfg.lr_ae;

  LatentGanConfig gan_cfg;
  gan_cfg.latent_dim = cfg.hidden;
  gan_cfg.hidden = cfg.gan_hidden;
  gan_cfg.gp_coeff = cfg.gp_coeff;
  gan_cfg.lr = cfg.lr_adv;

  RandomSource init_rng(0);
  PogModel model{cfg,
                 TextAutoencoder(ae_cfg, vocab, init_rng),
                 LatentGan(gan_cfg, init_rng),
                 AuxClassifier(ac_net_config(cfg, vocab.size(),
                                             static_cast<int>(
                                                 shell.label_names.size())),
                               cfg.max_len, init_rng),
                 TemperatureSchedule{},
                 shell.label_names};

  const auto& sched = j.at("schedule");
  model.schedule.t0 = sched.at("t0").get<Scalar>();
  model.schedule.t_min = sched.at("t_min").get<Scalar>();
  model.schedule.total_steps = sched.at("total_steps").get<long>();
  model.schedule.step = sched.at("step").get<long>();

  const auto& params = j.at("params");
  params_from_json(params.at("encoder"), model.ae.enc.params());
  params_from_json(params.at("decoder"), model.ae.dec.params());
  params_from_json(params.at("generator"), model.gan.generator.params());
  params_from_json(params.at("discriminator"),
                   model.gan.discriminator.params());
  params_from_json(params.at("ac"), model.ac.net.params());

  if (j.at("vocab_hash").get<std::string>() != model.vocab().hash())
    throw ConfigError("pog checkpoint vocab hash mismatch");
  return model;
}

void save_pog_log(const std::vector<PogIterLog>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss log: " + path);
  for (const PogIterLog& e : log) {
    nlohmann::json j = {{"iter", e.iter},   {"rec", e.rec},
                        {"ac_ce", e.ac_ce}, {"d", e.d_loss},
                        {"gp", e.gp},       {"g_adv", e.g_adv},
                        {"g_ent", e.g_ent}, {"rec_mix", e.rec_mix},
                        {"d_mix", e.d_mix}};
    out << j.dump() << "\n";
  }
}

}  // namespace pog

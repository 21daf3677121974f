// classifier.cpp
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

#include "pog/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pog/errors.hpp"
#include "pog/serialize.hpp"

namespace pog {

using ad::Tape;
using ad::Var;

namespace {

nn::TextCnnConfig net_config(const ClassifierConfig& cfg, int vocab_size,
                             int num_classes) {
  nn::TextCnnConfig nc;
  nc.vocab_size = vocab_size;
  nc.embed_dim = cfg.embed_dim;
  nc.kernel_widths = cfg.kernel_widths;
  nc.feature_maps = cfg.feature_maps;
  nc.hidden = cfg.hidden;
  nc.hidden_layers = cfg.hidden_layers;
  nc.num_classes = num_classes;
  nc.dropout = cfg.dropout;
  return nc;
}

std::vector<int> flatten_ids(const std::vector<TokenSequence>& xs,
                             const std::vector<size_t>& pick, int max_len) {
  std::vector<int> flat;
  flat.reserve(pick.size() * static_cast<size_t>(max_len));
  for (size_t i : pick) {
    const TokenSequence& s = xs[i];
    if (s.max_len() > max_len)
      throw std::invalid_argument("sequence longer than classifier max_len");
    for (int t = 0; t < max_len; ++t)
      flat.push_back(t < s.max_len() ? s.ids[static_cast<size_t>(t)]
                                     : Vocabulary::kPad);
  }
  return flat;
}

std::vector<size_t> all_indices(size_t n) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

IntentClassifier::IntentClassifier(const ClassifierConfig& config,
                                   Vocabulary v,
                                   std::vector<std::string> labels,
                                   RandomSource& rng)
    : cfg(config),
      vocab(std::move(v)),
      label_names(std::move(labels)),
      net(net_config(config, vocab.size(), static_cast<int>(label_names.size())),
          rng) {}

Matrix predict_batch(IntentClassifier& clf,
                     const std::vector<TokenSequence>& xs) {
  Matrix out(static_cast<Eigen::Index>(xs.size()), clf.num_classes());
  const size_t chunk = 256;
  for (size_t start = 0; start < xs.size(); start += chunk) {
    std::vector<size_t> pick;
    for (size_t i = start; i < std::min(xs.size(), start + chunk); ++i)
      pick.push_back(i);
    Tape tape;
    nn::LeafMap lm(tape);
    Var logits = nn::textcnn_logits(
        tape, lm, clf.net, flatten_ids(xs, pick, clf.cfg.max_len),
        clf.cfg.max_len, nullptr);
    Matrix probs = ad::softmax_rows(logits).value();
    for (size_t i = 0; i < pick.size(); ++i)
      out.row(static_cast<Eigen::Index>(pick[i])) =
          probs.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

PredictedDistribution predict(IntentClassifier& clf, const TokenSequence& x) {
  Matrix probs = predict_batch(clf, {x});
  return PredictedDistribution{probs.row(0).transpose()};
}

Matrix features_batch(IntentClassifier& clf,
                      const std::vector<TokenSequence>& xs) {
  Matrix out(static_cast<Eigen::Index>(xs.size()), clf.cfg.hidden);
  const size_t chunk = 256;
  for (size_t start = 0; start < xs.size(); start += chunk) {
    std::vector<size_t> pick;
    for (size_t i = start; i < std::min(xs.size(), start + chunk); ++i)
      pick.push_back(i);
    Tape tape;
    nn::LeafMap lm(tape);
    Var feats;
    nn::textcnn_logits(tape, lm, clf.net,
                       flatten_ids(xs, pick, clf.cfg.max_len), clf.cfg.max_len,
                       nullptr, &feats);
    for (size_t i = 0; i < pick.size(); ++i)
      out.row(static_cast<Eigen::Index>(pick[i])) =
          feats.value().row(static_cast<Eigen::Index>(i));
  }
  return out;
}

Scalar detection_score(const PredictedDistribution& dist) {
  return dist.probs.maxCoeff();
}

Scalar shannon_entropy(const Vector& probs) {
  Scalar h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
  return h;
}

Scalar cross_entropy_loss(IntentClassifier& clf,
                          const std::vector<TokenSequence>& xs,
                          const std::vector<int>& labels) {
  for (int y : labels)
    if (y < 0 || y >= clf.num_classes())
      throw std::invalid_argument("label out of range");
  Tape tape;
  nn::LeafMap lm(tape);
  Var logits =
      nn::textcnn_logits(tape, lm, clf.net,
                         flatten_ids(xs, all_indices(xs.size()), clf.cfg.max_len),
                         clf.cfg.max_len, nullptr);
  return nn::nll_loss(tape, logits, labels).scalar();
}

Scalar entropy_regularizer(IntentClassifier& clf,
                           const std::vector<TokenSequence>& xs) {
  if (xs.empty()) throw std::invalid_argument("entropy_regularizer: empty batch");
  Tape tape;
  nn::LeafMap lm(tape);
  Var logits =
      nn::textcnn_logits(tape, lm, clf.net,
                         flatten_ids(xs, all_indices(xs.size()), clf.cfg.max_len),
                         clf.cfg.max_len, nullptr);
  return nn::mean_negative_entropy(tape, logits).scalar();
}

Scalar total_loss(Scalar ce, Scalar ent, Scalar alpha) {
  if (alpha < 0.0) throw std::invalid_argument("total_loss: alpha must be >= 0");
  return ce + alpha * ent;
}

namespace {

struct BatchCycler {
  std::vector<size_t> order;
  size_t pos = 0;
  RandomSource* rng;

  BatchCycler(size_t n, RandomSource* r) : order(all_indices(n)), rng(r) {
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

}  // namespace

TrainLog train_classifier(IntentClassifier& clf, const DatasetBundle& bundle,
                          const std::vector<Tokens>& pseudo_texts,
                          RandomSource& rng) {
  const ClassifierConfig& cfg = clf.cfg;
  std::vector<TokenSequence> train_x =
      encode_split(bundle.ind_train, clf.vocab, cfg.max_len);
  std::vector<TokenSequence> val_x =
      encode_split(bundle.ind_val, clf.vocab, cfg.max_len);
  const std::vector<int>& train_y = bundle.ind_train_labels;
  const std::vector<int>& val_y = bundle.ind_val_labels;
  if (train_x.empty()) throw ConfigError("classifier: empty training split");

  // Resolve the entropy-regularization pool.
  std::vector<TokenSequence> er_pool;
  if (cfg.er_source == "pseudo_ood") {
    if (pseudo_texts.empty())
      throw ConfigError("er_source pseudo_ood requires a non-empty pseudo set");
    er_pool = encode_split(pseudo_texts, clf.vocab, cfg.max_len);
  } else if (cfg.er_source == "perturb") {
    RandomSource perturb_rng = rng.fork("perturb");
    for (const TokenSequence& s : train_x)
      er_pool.push_back(perturb(s, cfg.perturb_rate, clf.vocab, perturb_rng));
  } else if (cfg.er_source == "mix") {
    if (bundle.mix.empty())
      throw ConfigError("er_source mix requires a non-empty mix split");
    er_pool = encode_split(bundle.mix, clf.vocab, cfg.max_len);
  } else if (cfg.er_source != "none") {
    throw ConfigError("unknown er_source: " + cfg.er_source);
  }
  const bool use_er = !er_pool.empty() && cfg.alpha > 0.0;

  RandomSource batch_rng = rng.fork("batches");
  RandomSource er_rng = rng.fork("er_batches");
  RandomSource dropout_rng = rng.fork("dropout");
  BatchCycler ind_cycle(train_x.size(), &batch_rng);
  BatchCycler er_cycle(use_er ? er_pool.size() : 1, &er_rng);

  nn::AdamConfig adam;
  adam.lr = cfg.lr;
  nn::ParamRefs params = clf.net.params();

  size_t steps_per_epoch =
      (train_x.size() + static_cast<size_t>(cfg.batch_size) - 1) /
      static_cast<size_t>(cfg.batch_size);

  TrainLog log;
  std::vector<Matrix> best_values;
  Scalar best_acc = -1.0;

  auto val_accuracy = [&]() {
    if (val_x.empty()) return 0.0;
    Matrix probs = predict_batch(clf, val_x);
    int hits = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      Eigen::Index arg;
      probs.row(i).maxCoeff(&arg);
      if (static_cast<int>(arg) == val_y[static_cast<size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Scalar ce_sum = 0.0, er_sum = 0.0;
    for (size_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<size_t> pick =
          ind_cycle.next(static_cast<size_t>(cfg.batch_size));
      std::vector<int> labels;
      for (size_t i : pick) labels.push_back(train_y[i]);

      Tape tape;
      nn::LeafMap lm(tape);
      Var logits = nn::textcnn_logits(
          tape, lm, clf.net, flatten_ids(train_x, pick, cfg.max_len),
          cfg.max_len, &dropout_rng);
      Var ce = nn::nll_loss(tape, logits, labels);
      Var loss = ce;
      Scalar er_value = 0.0;
      if (use_er) {
        std::vector<size_t> er_pick =
            er_cycle.next(static_cast<size_t>(cfg.batch_size));
        Var er_logits = nn::textcnn_logits(
            tape, lm, clf.net, flatten_ids(er_pool, er_pick, cfg.max_len),
            cfg.max_len, &dropout_rng);
        Var er = nn::mean_negative_entropy(tape, er_logits);
        er_value = er.scalar();
        loss = ad::add(ce, ad::axpb(er, cfg.alpha, 0.0));
      }
      if (!std::isfinite(loss.scalar()))
        throw DivergenceError("classifier training diverged at epoch " +
                              std::to_string(epoch));
      nn::step_params(adam, tape, lm, loss, params);
      ce_sum += ce.scalar();
      er_sum += er_value;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.ce = ce_sum / static_cast<double>(steps_per_epoch);
    entry.er = er_sum / static_cast<double>(steps_per_epoch);
    entry.val_acc = val_accuracy();
    log.epochs.push_back(entry);

    if (entry.val_acc > best_acc) {
      best_acc = entry.val_acc;
      best_values.clear();
      for (nn::Param* p : params) best_values.push_back(p->value);
    }
  }

  if (!best_values.empty())
    for (size_t i = 0; i < params.size(); ++i)
      params[i]->value = best_values[i];
  log.best_val_acc = std::max(best_acc, 0.0);
  return log;
}

void save_classifier(const IntentClassifier& clf, const std::string& path,
                     const std::string& config_echo) {
  nlohmann::json j;
  j["kind"] = "classifier";
  j["config"] = {{"max_len", clf.cfg.max_len},
                 {"embed_dim", clf.cfg.embed_dim},
                 {"kernel_widths", clf.cfg.kernel_widths},
                 {"feature_maps", clf.cfg.feature_maps},
                 {"hidden", clf.cfg.hidden},
                 {"hidden_layers", clf.cfg.hidden_layers},
                 {"dropout", clf.cfg.dropout},
                 {"epochs", clf.cfg.epochs},
                 {"batch_size", clf.cfg.batch_size},
                 {"lr", clf.cfg.lr},
                 {"alpha", clf.cfg.alpha},
                 {"er_source", clf.cfg.er_source},
                 {"perturb_rate", clf.cfg.perturb_rate}};
  j["vocab_hash"] = clf.vocab.hash();
  j["vocab"] = clf.vocab.id_to_token;
  j["min_count"] = clf.vocab.min_count;
  j["label_names"] = clf.label_names;
  if (!config_echo.empty()) j["experiment_config"] = config_echo;
  j["params"] = params_to_json(const_cast<IntentClassifier&>(clf).net.params());
  write_json_file(path, j);
}

IntentClassifier load_classifier(const std::string& path) {
  nlohmann::json j = read_json_file(path);
  if (j.at("kind") != "classifier")
    throw ConfigError("not a classifier checkpoint: " + path);
  ClassifierConfig cfg;
  const auto& c = j.at("config");
  cfg.max_len = c.at("max_len").get<int>();
  cfg.embed_dim = c.at("embed_dim").get<Eigen::Index>();
  cfg.kernel_widths = c.at("kernel_widths").get<std::vector<Eigen::Index>>();
  cfg.feature_maps = c.at("feature_maps").get<Eigen::Index>();
  cfg.hidden = c.at("hidden").get<Eigen::Index>();
  cfg.hidden_layers = c.at("hidden_layers").get<int>();
  cfg.dropout = c.at("dropout").get<Scalar>();
  cfg.epochs = c.at("epochs").get<int>();
  cfg.batch_size = c.at("batch_size").get<int>();
  cfg.lr = c.at("lr").get<Scalar>();
  cfg.alpha = c.at("alpha").get<Scalar>();
  cfg.er_source = c.at("er_source").get<std::string>();
  cfg.perturb_rate = c.at("perturb_rate").get<Scalar>();

  Vocabulary vocab;
  vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
  vocab.min_count = j.at("min_count").get<int>();
  for (size_t i = 0; i < vocab.id_to_token.size(); ++i)
    vocab.token_to_id[vocab.id_to_token[i]] = static_cast<int>(i);

  RandomSource init_rng(0);
  IntentClassifier clf(cfg, std::move(vocab),
                       j.at("label_names").get<std::vector<std::string>>(),
                       init_rng);
  params_from_json(j.at("params"), clf.net.params());
  if (j.at("vocab_hash").get<std::string>() != clf.vocab.hash())
    throw ConfigError("classifier checkpoint vocab hash mismatch");
  return clf;
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write train log: " + path);
  for (const EpochLog& e : log.epochs) {
    nlohmann::json j = {{"epoch", e.epoch},
                        {"ce", e.ce},
                        {"er", e.er},
                        {"val_acc", e.val_acc}};
    out << j.dump() << "\n";
  }
}

}  // namespace pog

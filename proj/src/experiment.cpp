// experiment.cpp
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

#include "pog/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pog/errors.hpp"
#include "pog/serialize.hpp"

namespace pog {

namespace fs = std::filesystem;

std::uint64_t derived_seed(std::uint64_t seed, const std::string& tag) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix-style diffusion of the combined value
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

ClassifierConfig classifier_from_json(const nlohmann::json& j, int max_len) {
  ClassifierConfig c;
  c.max_len = max_len;
  c.embed_dim = get_or<Eigen::Index>(j, "embed_dim", c.embed_dim);
  c.kernel_widths =
      get_or<std::vector<Eigen::Index>>(j, "kernel_widths", c.kernel_widths);
  c.feature_maps = get_or<Eigen::Index>(j, "feature_maps", c.feature_maps);
  c.hidden = get_or<Eigen::Index>(j, "hidden", c.hidden);
  c.hidden_layers = get_or<int>(j, "hidden_layers", c.hidden_layers);
  c.dropout = get_or<Scalar>(j, "dropout", c.dropout);
  c.epochs = get_or<int>(j, "epochs", c.epochs);
  c.batch_size = get_or<int>(j, "batch_size", c.batch_size);
  c.lr = get_or<Scalar>(j, "lr", c.lr);
  c.alpha = get_or<Scalar>(j, "alpha", c.alpha);
  c.perturb_rate = get_or<Scalar>(j, "perturb_rate", c.perturb_rate);
  return c;
}

PogConfig pog_from_json(const nlohmann::json& j, int max_len) {
  PogConfig c;
  c.max_len = max_len;
  c.mode = get_or<std::string>(j, "mode", c.mode);
  c.epochs = get_or<int>(j, "epochs", c.epochs);
  c.batch_size = get_or<int>(j, "batch_size", c.batch_size);
  c.embed_dim = get_or<Eigen::Index>(j, "embed_dim", c.embed_dim);
  c.hidden = get_or<Eigen::Index>(j, "hidden", c.hidden);
  c.noise_std = get_or<Scalar>(j, "noise_std", c.noise_std);
  c.lr_ae = get_or<Scalar>(j, "lr_ae", c.lr_ae);
  c.gan_hidden = get_or<Eigen::Index>(j, "gan_hidden", c.gan_hidden);
  c.gp_coeff = get_or<Scalar>(j, "gp_coeff", c.gp_coeff);
  c.lr_adv = get_or<Scalar>(j, "lr_adv", c.lr_adv);
  c.ac_kernel_widths = get_or<std::vector<Eigen::Index>>(j, "ac_kernel_widths",
                                                         c.ac_kernel_widths);
  c.ac_feature_maps =
      get_or<Eigen::Index>(j, "ac_feature_maps", c.ac_feature_maps);
  c.ac_hidden = get_or<Eigen::Index>(j, "ac_hidden", c.ac_hidden);
  c.ac_hidden_layers = get_or<int>(j, "ac_hidden_layers", c.ac_hidden_layers);
  c.ac_dropout = get_or<Scalar>(j, "ac_dropout", c.ac_dropout);
  c.lr_ac = get_or<Scalar>(j, "lr_ac", c.lr_ac);
  c.t_min = get_or<Scalar>(j, "t_min", c.t_min);
  c.dedup_samples = get_or<bool>(j, "dedup_samples", c.dedup_samples);
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(nlohmann::json j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  if (!j.contains("dataset")) throw ConfigError("config: missing dataset path");
  cfg.dataset_path = j.at("dataset").get<std::string>();
  cfg.out_dir = get_or<std::string>(j, "out_dir", cfg.out_dir);
  cfg.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
  cfg.max_len = get_or<int>(j, "max_len", cfg.max_len);
  cfg.min_count = get_or<int>(j, "min_count", cfg.min_count);
  cfg.target_tprs =
      get_or<std::vector<double>>(j, "target_tprs", cfg.target_tprs);
  cfg.detectors =
      get_or<std::vector<std::string>>(j, "detectors", cfg.detectors);
  cfg.sample_n = get_or<int>(j, "sample_n", cfg.sample_n);
  cfg.classifier = classifier_from_json(
      j.contains("classifier") ? j.at("classifier") : nlohmann::json::object(),
      cfg.max_len);
  cfg.pog = pog_from_json(
      j.contains("pog") ? j.at("pog") : nlohmann::json::object(), cfg.max_len);
  if (j.contains("ae_baseline")) {
    cfg.ae_epochs = get_or<int>(j.at("ae_baseline"), "epochs", cfg.ae_epochs);
    cfg.ae_noise_std =
        get_or<Scalar>(j.at("ae_baseline"), "noise_std", cfg.ae_noise_std);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(
    const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json j;
  {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
  }
  for (const std::string& ov : overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must be key=value: " + ov);
    std::string key = ov.substr(0, eq);
    std::string value = ov.substr(eq + 1);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = value;  // plain string
    }
    nlohmann::json* cursor = &j;
    size_t start = 0;
    while (true) {
      size_t dot = key.find('.', start);
      std::string part = key.substr(start, dot - start);
      if (dot == std::string::npos) {
        (*cursor)[part] = parsed;
        break;
      }
      cursor = &(*cursor)[part];
      start = dot + 1;
    }
  }
  try {
    return from_json(std::move(j));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
}

namespace {

Vocabulary classifier_vocab(const DatasetBundle& bundle, int min_count) {
  std::vector<Tokens> texts;
  for (const auto* split :
       {&bundle.ind_train, &bundle.ind_val, &bundle.ind_test, &bundle.ood_val,
        &bundle.ood_test})
    texts.insert(texts.end(), split->begin(), split->end());
  return build_vocab(texts, min_count);
}

// Everything one evaluation seed may need, built lazily so each detector
// trains only its own dependencies.
struct SeedContext {
  const ExperimentConfig& cfg;
  const DatasetBundle& bundle;
  std::uint64_t seed;

  Vocabulary clf_vocab;
  std::vector<TokenSequence> ind_val_x, ind_test_x, ood_val_x, ood_test_x;
  std::vector<TokenSequence> ind_train_x;

  std::optional<IntentClassifier> base_clf;
  std::optional<TextAutoencoder> ae_baseline;
  std::optional<PogTrainResult> pog_run, aepog_run;
  std::vector<Tokens> pog_samples, aepog_samples;
  std::map<std::string, IntentClassifier> er_clfs;
  std::map<std::string, TrainLog> logs;

  SeedContext(const ExperimentConfig& c, const DatasetBundle& b,
              std::uint64_t s)
      : cfg(c), bundle(b), seed(s) {
    clf_vocab = classifier_vocab(bundle, cfg.min_count);
    ind_train_x = encode_split(bundle.ind_train, clf_vocab, cfg.max_len);
    ind_val_x = encode_split(bundle.ind_val, clf_vocab, cfg.max_len);
    ind_test_x = encode_split(bundle.ind_test, clf_vocab, cfg.max_len);
    ood_val_x = encode_split(bundle.ood_val, clf_vocab, cfg.max_len);
    ood_test_x = encode_split(bundle.ood_test, clf_vocab, cfg.max_len);
  }

  // `key` names the cached run (er_pog and er_aepog share er_source
  // pseudo_ood but differ in their pseudo sets).
  IntentClassifier& classifier_for(const std::string& key,
                                   const std::string& er_source,
                                   const std::vector<Tokens>& pseudo) {
    if (er_source == "none") {
      if (!base_clf) {
        ClassifierConfig c = cfg.classifier;
        c.er_source = "none";
        RandomSource rng(derived_seed(seed, "clf:none"));
        base_clf.emplace(c, clf_vocab, bundle.label_names, rng);
        logs["none"] = train_classifier(*base_clf, bundle, {}, rng);
      }
      return *base_clf;
    }
    auto it = er_clfs.find(key);
    if (it != er_clfs.end()) return it->second;
    ClassifierConfig c = cfg.classifier;
    c.er_source = er_source;
    RandomSource rng(derived_seed(seed, "clf:" + key));
    IntentClassifier clf(c, clf_vocab, bundle.label_names, rng);
    logs[key] = train_classifier(clf, bundle, pseudo, rng);
    auto [pos, inserted] = er_clfs.emplace(key, std::move(clf));
    return pos->second;
  }

  PogTrainResult& pog() {
    if (!pog_run) {
      PogConfig c = cfg.pog;
      c.mode = "pog";
      pog_run = train_pog(bundle, c, derived_seed(seed, "pog"));
      RandomSource rng(derived_seed(seed, "sample:pog"));
      int n = cfg.sample_n > 0 ? cfg.sample_n
                               : static_cast<int>(bundle.ind_train.size());
      pog_samples = sequences_to_tokens(
          sample_pseudo_ood(pog_run->model, n, rng), pog_run->model.vocab());
    }
    return *pog_run;
  }

  PogTrainResult& aepog() {
    if (!aepog_run) {
      PogConfig c = cfg.pog;
      c.mode = "aepog";
      aepog_run = train_aepog(bundle, c, derived_seed(seed, "aepog"));
      RandomSource rng(derived_seed(seed, "sample:aepog"));
      int n = cfg.sample_n > 0 ? cfg.sample_n
                               : static_cast<int>(bundle.ind_train.size());
      aepog_samples =
          sequences_to_tokens(sample_pseudo_ood(aepog_run->model, n, rng),
                              aepog_run->model.vocab());
    }
    return *aepog_run;
  }

  TextAutoencoder& ae() {
    if (!ae_baseline) {
      Vocabulary gen_vocab = build_vocab(bundle.ind_train, 1);
      AutoencoderConfig c;
      c.embed_dim = cfg.pog.embed_dim;
      c.hidden = cfg.pog.hidden;
      c.max_len = cfg.max_len;
      c.noise_std = cfg.ae_noise_std;
      c.epochs = cfg.ae_epochs;
      c.batch_size = cfg.pog.batch_size;
      c.lr = cfg.pog.lr_ae;
      RandomSource rng(derived_seed(seed, "ae"));
      ae_baseline.emplace(c, gen_vocab, rng);
      std::vector<TokenSequence> train =
          encode_split(bundle.ind_train, gen_vocab, cfg.max_len);
      train_autoencoder(*ae_baseline, train, rng);
    }
    return *ae_baseline;
  }
};

struct MethodScores {
  ScoredSet test;
  std::vector<double> val_ind;
  std::optional<double> ind_acc;
};

MethodScores score_method(SeedContext& ctx, const std::string& method) {
  MethodScores out;
  out.test.method = method;
  auto classifier_scores = [&](IntentClassifier& clf, bool use_entropy) {
    out.test.ind_scores = use_entropy ? entropy_scores(clf, ctx.ind_test_x)
                                      : msp_scores(clf, ctx.ind_test_x);
    out.test.ood_scores = use_entropy ? entropy_scores(clf, ctx.ood_test_x)
                                      : msp_scores(clf, ctx.ood_test_x);
    out.val_ind = use_entropy ? entropy_scores(clf, ctx.ind_val_x)
                              : msp_scores(clf, ctx.ind_val_x);
    out.ind_acc = classification_accuracy(clf, ctx.ind_test_x,
                                          ctx.bundle.ind_test_labels);
  };

  if (method == "msp") {
    classifier_scores(ctx.classifier_for("none", "none", {}), false);
  } else if (method == "entropy") {
    classifier_scores(ctx.classifier_for("none", "none", {}), true);
  } else if (method == "knn") {
    IntentClassifier& clf = ctx.classifier_for("none", "none", {});
    KnnScorer scorer =
        fit_knn(clf, ctx.ind_train_x, ctx.bundle.ind_train_labels);
    out.test.ind_scores = knn_scores(scorer, clf, ctx.ind_test_x);
    out.test.ood_scores = knn_scores(scorer, clf, ctx.ood_test_x);
    out.val_ind = knn_scores(scorer, clf, ctx.ind_val_x);
    out.ind_acc = classification_accuracy(clf, ctx.ind_test_x,
                                          ctx.bundle.ind_test_labels);
  } else if (method == "ae") {
    TextAutoencoder& ae = ctx.ae();
    std::vector<TokenSequence> ind_test =
        encode_split(ctx.bundle.ind_test, ae.vocab, ctx.cfg.max_len);
    std::vector<TokenSequence> ood_test =
        encode_split(ctx.bundle.ood_test, ae.vocab, ctx.cfg.max_len);
    std::vector<TokenSequence> ind_val =
        encode_split(ctx.bundle.ind_val, ae.vocab, ctx.cfg.max_len);
    out.test.ind_scores = ae_scores(ae, ind_test);
    out.test.ood_scores = ae_scores(ae, ood_test);
    out.val_ind = ae_scores(ae, ind_val);
  } else if (method == "er_perturb") {
    classifier_scores(ctx.classifier_for("perturb", "perturb", {}), false);
  } else if (method == "er_mix") {
    classifier_scores(ctx.classifier_for("mix", "mix", {}), false);
  } else if (method == "er_pog") {
    ctx.pog();
    classifier_scores(
        ctx.classifier_for("er_pog", "pseudo_ood", ctx.pog_samples), false);
  } else if (method == "er_aepog") {
    ctx.aepog();
    classifier_scores(
        ctx.classifier_for("er_aepog", "pseudo_ood", ctx.aepog_samples), false);
  } else {
    throw ConfigError("unknown detector: " + method);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << v;
  return out.str();
}

}  // namespace

std::string aggregate_csv(const EvaluateResult& result) {
  const char* metrics[] = {"auroc", "aupr", "fpr95", "fpr90", "ind_acc"};
  std::ostringstream out;
  out << "method";
  for (const char* m : metrics) out << "," << m << "_mean," << m << "_std";
  out << "\n";
  for (const std::string& method : result.methods) {
    out << method;
    const auto& agg = result.aggregate.at(method);
    for (const char* m : metrics) {
      auto it = agg.find(m);
      if (it == agg.end())
        out << ",,";
      else
        out << "," << format_double(it->second.first) << ","
            << format_double(it->second.second);
    }
    out << "\n";
  }
  return out.str();
}

EvaluateResult run_evaluate(const ExperimentConfig& cfg, bool write_outputs,
                            std::ostream* progress) {
  DatasetBundle bundle = load_bundle(cfg.dataset_path);
  if (write_outputs) fs::create_directories(cfg.out_dir);

  EvaluateResult result;
  result.methods = cfg.detectors;

  for (std::uint64_t seed : cfg.seeds) {
    SeedContext ctx(cfg, bundle, seed);
    for (const std::string& method : cfg.detectors) {
      if (progress)
        (*progress) << "[evaluate] seed " << seed << " method " << method
                    << "\n"
                    << std::flush;
      MethodScores scores = score_method(ctx, method);
      std::optional<double> threshold;
      if (!scores.val_ind.empty())
        threshold = select_threshold(scores.val_ind, cfg.target_tprs.empty()
                                                         ? 95.0
                                                         : cfg.target_tprs[0]);
      DetectionReport report = make_report(scores.test, scores.ind_acc,
                                           threshold, cfg.target_tprs);
      report.seeds = {seed};
      report.config_echo = cfg.raw;
      result.reports[method].push_back(report);

      if (write_outputs) {
        std::string base = cfg.out_dir + "/" + method + "_seed" +
                           std::to_string(seed);
        write_json_file(base + "_report.json", report.to_json());
      }
    }
    if (write_outputs) {
      // Persist generation artifacts when they were trained for this seed.
      auto dump_pog = [&](PogTrainResult& run, const std::vector<Tokens>& toks,
                          const std::string& tag) {
        std::string base =
            cfg.out_dir + "/" + tag + "_seed" + std::to_string(seed);
        save_pog(run.model, base + ".json", cfg.raw.dump());
        save_pog_log(run.log, base + "_loss.jsonl");
        std::vector<std::string> texts;
        for (const Tokens& t : toks) {
          std::string s;
          for (size_t i = 0; i < t.size(); ++i) {
            if (i) s += ' ';
            s += t[i];
          }
          texts.push_back(s);
        }
        save_text_lines(base + "_samples.jsonl", texts);
      };
      if (ctx.pog_run) dump_pog(*ctx.pog_run, ctx.pog_samples, "pog");
      if (ctx.aepog_run) dump_pog(*ctx.aepog_run, ctx.aepog_samples, "aepog");
    }
  }

  // Aggregate mean and sample std per metric over seeds.
  for (const std::string& method : result.methods) {
    const auto& reports = result.reports[method];
    auto collect = [&](auto getter) {
      std::vector<double> vals;
      for (const DetectionReport& r : reports) {
        auto v = getter(r);
        if (v) vals.push_back(*v);
      }
      return vals;
    };
    std::map<std::string, std::vector<double>> metric_values = {
        {"auroc", collect([](const auto& r) { return r.auroc_value; })},
        {"aupr", collect([](const auto& r) { return r.aupr_value; })},
        {"fpr95", collect([](const auto& r) { return r.fpr95; })},
        {"fpr90", collect([](const auto& r) { return r.fpr90; })},
        {"ind_acc", collect([](const auto& r) { return r.ind_accuracy; })}};
    for (const auto& [name, vals] : metric_values) {
      if (vals.empty()) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      double stddev =
          vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1))
                          : 0.0;
      result.aggregate[method][name] = {mean, stddev};
    }
  }

  if (write_outputs) {
    std::ofstream csv(cfg.out_dir + "/summary.csv");
    csv << aggregate_csv(result);
  }
  return result;
}

std::string run_train_pog(const ExperimentConfig& cfg, std::uint64_t seed) {
  DatasetBundle bundle = load_bundle(cfg.dataset_path);
  fs::create_directories(cfg.out_dir);
  PogConfig pc = cfg.pog;
  PogTrainResult run = pc.mode == "aepog" ? train_aepog(bundle, pc, seed)
                                          : train_pog(bundle, pc, seed);
  std::string base =
      cfg.out_dir + "/" + pc.mode + "_seed" + std::to_string(seed);
  save_pog(run.model, base + ".json", cfg.raw.dump());
  save_pog_log(run.log, base + "_loss.jsonl");
  return base + ".json";
}

std::string run_train_classifier(const ExperimentConfig& cfg,
                                 std::uint64_t seed) {
  DatasetBundle bundle = load_bundle(cfg.dataset_path);
  fs::create_directories(cfg.out_dir);
  Vocabulary vocab = classifier_vocab(bundle, cfg.min_count);

  std::vector<Tokens> pseudo;
  ClassifierConfig cc = cfg.classifier;
  if (cc.er_source == "pseudo_ood") {
    if (!cfg.raw.contains("pseudo_path"))
      throw ConfigError("er_source pseudo_ood needs config key pseudo_path");
    pseudo = load_text_lines(cfg.raw.at("pseudo_path").get<std::string>());
  }

  RandomSource rng(derived_seed(seed, "clf:" + cc.er_source));
  IntentClassifier clf(cc, vocab, bundle.label_names, rng);
  TrainLog log = train_classifier(clf, bundle, pseudo, rng);
  std::string base =
      cfg.out_dir + "/classifier_" + cc.er_source + "_seed" +
      std::to_string(seed);
  save_classifier(clf, base + ".json", cfg.raw.dump());
  save_train_log(log, base + "_train.jsonl");
  return base + ".json";
}

void run_generate(const std::string& checkpoint_path, int n,
                  std::uint64_t seed, const std::string& out_path,
                  std::ostream& console) {
  PogModel model = load_pog(checkpoint_path);
  RandomSource rng(derived_seed(seed, "generate"));
  std::vector<TokenSequence> seqs = sample_pseudo_ood(model, n, rng);
  std::vector<std::string> texts;
  for (const TokenSequence& s : seqs)
    texts.push_back(decode_text(s, model.vocab()));
  save_text_lines(out_path, texts);

  console << "wrote " << texts.size() << " samples to " << out_path << "\n";
  int show = std::min<int>(5, static_cast<int>(texts.size()));
  for (int i = 0; i < show; ++i) {
    int pick = rng.uniform_int(0, static_cast<int>(texts.size()) - 1);
    console << "  sample: " << texts[static_cast<size_t>(pick)] << "\n";
  }
}

DetectionReport run_metrics_file(const std::string& scores_path) {
  std::ifstream in(scores_path);
  if (!in) throw ConfigError("cannot open scores file: " + scores_path);
  ScoredSet set;
  set.method = "file";
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed score record at line " +
                        std::to_string(line_no) + ": " + e.what());
    }
    double score = rec.at("score").get<double>();
    std::string label = rec.at("label").get<std::string>();
    if (label == "ind")
      set.ind_scores.push_back(score);
    else if (label == "ood")
      set.ood_scores.push_back(score);
    else
      throw ConfigError("score label must be ind or ood at line " +
                        std::to_string(line_no));
  }
  std::optional<double> threshold;
  if (!set.ind_scores.empty()) threshold = select_threshold(set.ind_scores, 95);
  return make_report(set, std::nullopt, threshold);
}

}  // namespace pog

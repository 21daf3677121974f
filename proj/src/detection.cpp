// detection.cpp
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

#include "pog/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace pog {

namespace {

void require_nonempty(const ScoredSet& s) {
  if (s.ind_scores.empty() || s.ood_scores.empty())
    throw std::invalid_argument("scored set needs both populations");
  for (double v : s.ind_scores)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite score");
  for (double v : s.ood_scores)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite score");
}

}  // namespace

double auroc(const ScoredSet& s) {
  require_nonempty(s);
  // Group-sorted sweep; exact with ties.
  std::vector<std::pair<double, int>> all;  // (score, is_ind)
  for (double v : s.ind_scores) all.emplace_back(v, 1);
  for (double v : s.ood_scores) all.emplace_back(v, 0);
  std::sort(all.begin(), all.end());
  double correct = 0.0, ties = 0.0;
  double ood_below = 0.0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    long g_ind = 0, g_ood = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      if (all[j].second) ++g_ind;
      else ++g_ood;
      ++j;
    }
    correct += static_cast<double>(g_ind) * ood_below;
    ties += static_cast<double>(g_ind) * static_cast<double>(g_ood);
    ood_below += static_cast<double>(g_ood);
    i = j;
  }
  double pairs = static_cast<double>(s.ind_scores.size()) *
                 static_cast<double>(s.ood_scores.size());
  return (correct + 0.5 * ties) / pairs;
}

double aupr(const ScoredSet& s) {
  require_nonempty(s);
  // OOD positive; predict positive when score <= t, t over ascending
  // observed scores.
  std::map<double, std::pair<long, long>> groups;  // score -> (ind, ood)
  for (double v : s.ind_scores) groups[v].first++;
  for (double v : s.ood_scores) groups[v].second++;
  double n_ood = static_cast<double>(s.ood_scores.size());
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, area = 0.0;
  for (const auto& [score, counts] : groups) {
    fp += static_cast<double>(counts.first);
    tp += static_cast<double>(counts.second);
    double recall = tp / n_ood;
    double precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

namespace {

// Largest threshold keeping (#ind >= t) / |ind| >= n/100.
double threshold_for_tpr(const std::vector<double>& ind_scores,
                         double n_percent) {
  std::vector<double> sorted = ind_scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double need = n_percent / 100.0 * static_cast<double>(sorted.size()) - 1e-9;
  size_t covered = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    covered = j;  // count of scores >= sorted[i]
    if (static_cast<double>(covered) >= need) return sorted[i];
    i = j;
  }
  return sorted.back();
}

}  // namespace

double fpr_at_tpr(const ScoredSet& s, double n_percent) {
  require_nonempty(s);
  double t = threshold_for_tpr(s.ind_scores, n_percent);
  long fp = 0;
  for (double v : s.ood_scores)
    if (v >= t) ++fp;
  return static_cast<double>(fp) / static_cast<double>(s.ood_scores.size());
}

double select_threshold(const std::vector<double>& val_ind_scores,
                        double target_tpr_percent) {
  if (val_ind_scores.empty())
    throw std::invalid_argument("select_threshold: no validation scores");
  return threshold_for_tpr(val_ind_scores, target_tpr_percent);
}

std::vector<RocPoint> roc_points(const ScoredSet& s) {
  require_nonempty(s);
  std::map<double, std::pair<long, long>, std::greater<>> groups;
  for (double v : s.ind_scores) groups[v].first++;
  for (double v : s.ood_scores) groups[v].second++;
  double n_ind = static_cast<double>(s.ind_scores.size());
  double n_ood = static_cast<double>(s.ood_scores.size());
  std::vector<RocPoint> out{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  for (const auto& [score, counts] : groups) {
    tp += static_cast<double>(counts.first);
    fp += static_cast<double>(counts.second);
    out.push_back({fp / n_ood, tp / n_ind});
  }
  return out;
}

ScoreHistogram score_histogram(const ScoredSet& s, int bins) {
  require_nonempty(s);
  double lo = std::min(*std::min_element(s.ind_scores.begin(), s.ind_scores.end()),
                       *std::min_element(s.ood_scores.begin(), s.ood_scores.end()));
  double hi = std::max(*std::max_element(s.ind_scores.begin(), s.ind_scores.end()),
                       *std::max_element(s.ood_scores.begin(), s.ood_scores.end()));
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  ScoreHistogram h;
  h.bin_edges.resize(static_cast<size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b)
    h.bin_edges[static_cast<size_t>(b)] =
        lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  h.ind.assign(static_cast<size_t>(bins), 0);
  h.ood.assign(static_cast<size_t>(bins), 0);
  auto bin_of = [&](double v) {
    int b = static_cast<int>(
        std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    return std::clamp(b, 0, bins - 1);
  };
  for (double v : s.ind_scores) h.ind[static_cast<size_t>(bin_of(v))]++;
  for (double v : s.ood_scores) h.ood[static_cast<size_t>(bin_of(v))]++;
  return h;
}

double overlap_coefficient(const ScoredSet& s, int bins) {
  ScoreHistogram h = score_histogram(s, bins);
  double n_ind = static_cast<double>(s.ind_scores.size());
  double n_ood = static_cast<double>(s.ood_scores.size());
  double overlap = 0.0;
  for (size_t b = 0; b < h.ind.size(); ++b)
    overlap += std::min(static_cast<double>(h.ind[b]) / n_ind,
                        static_cast<double>(h.ood[b]) / n_ood);
  return overlap;
}

namespace {

nlohmann::json opt_to_json(const std::optional<double>& v) {
  if (v) return *v;
  return nullptr;
}

std::optional<double> opt_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

nlohmann::json DetectionReport::to_json() const {
  nlohmann::json j;
  j["method"] = method;
  j["seeds"] = seeds;
  j["metrics"] = {{"auroc", opt_to_json(auroc_value)},
                  {"aupr", opt_to_json(aupr_value)},
                  {"fpr95", opt_to_json(fpr95)},
                  {"fpr90", opt_to_json(fpr90)},
                  {"ind_acc", opt_to_json(ind_accuracy)}};
  j["threshold"] = opt_to_json(threshold);
  nlohmann::json roc_json = nlohmann::json::array();
  for (const RocPoint& p : roc)
    roc_json.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}});
  j["roc"] = std::move(roc_json);
  j["hist"] = {{"ind", hist.ind},
               {"ood", hist.ood},
               {"bin_edges", hist.bin_edges}};
  if (!config_echo.is_null()) j["config_echo"] = config_echo;
  return j;
}

DetectionReport DetectionReport::from_json(const nlohmann::json& j) {
  DetectionReport r;
  r.method = j.at("method").get<std::string>();
  r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  const auto& m = j.at("metrics");
  r.auroc_value = opt_from_json(m.at("auroc"));
  r.aupr_value = opt_from_json(m.at("aupr"));
  r.fpr95 = opt_from_json(m.at("fpr95"));
  r.fpr90 = opt_from_json(m.at("fpr90"));
  r.ind_accuracy = opt_from_json(m.at("ind_acc"));
  r.threshold = opt_from_json(j.at("threshold"));
  for (const auto& p : j.at("roc"))
    r.roc.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>()});
  r.hist.ind = j.at("hist").at("ind").get<std::vector<long>>();
  r.hist.ood = j.at("hist").at("ood").get<std::vector<long>>();
  r.hist.bin_edges = j.at("hist").at("bin_edges").get<std::vector<double>>();
  if (j.contains("config_echo")) r.config_echo = j.at("config_echo");
  return r;
}

DetectionReport make_report(const ScoredSet& s,
                            std::optional<double> ind_accuracy,
                            std::optional<double> threshold,
                            const std::vector<double>& target_tprs) {
  DetectionReport r;
  r.method = s.method;
  r.ind_accuracy = ind_accuracy;
  r.threshold = threshold;
  if (!s.ind_scores.empty() && !s.ood_scores.empty()) {
    r.auroc_value = auroc(s);
    r.aupr_value = aupr(s);
    for (double target : target_tprs) {
      double v = fpr_at_tpr(s, target);
      if (target == 95) r.fpr95 = v;
      if (target == 90) r.fpr90 = v;
    }
    r.roc = roc_points(s);
    r.hist = score_histogram(s);
  }
  return r;
}

// ---- scoring backends -------------------------------------------------------

double score_msp(IntentClassifier& clf, const TokenSequence& x) {
  return detection_score(predict(clf, x));
}

double score_entropy(IntentClassifier& clf, const TokenSequence& x) {
  return -shannon_entropy(predict(clf, x).probs);
}

double score_ae(TextAutoencoder& ae, const TokenSequence& x) {
  return -sequence_nll(ae, x);
}

std::vector<double> msp_scores(IntentClassifier& clf,
                               const std::vector<TokenSequence>& xs) {
  Matrix probs = predict_batch(clf, xs);
  std::vector<double> out(xs.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    out[static_cast<size_t>(i)] = probs.row(i).maxCoeff();
  return out;
}

std::vector<double> entropy_scores(IntentClassifier& clf,
                                   const std::vector<TokenSequence>& xs) {
  Matrix probs = predict_batch(clf, xs);
  std::vector<double> out(xs.size());
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    out[static_cast<size_t>(i)] = -shannon_entropy(probs.row(i).transpose());
  return out;
}

std::vector<double> ae_scores(TextAutoencoder& ae,
                              const std::vector<TokenSequence>& xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const TokenSequence& x : xs) out.push_back(-sequence_nll(ae, x));
  return out;
}

KnnScorer fit_knn(IntentClassifier& clf, const std::vector<TokenSequence>& xs,
                  const std::vector<int>& labels) {
  Matrix feats = features_batch(clf, xs);
  KnnScorer scorer;
  scorer.centroids = Matrix::Zero(clf.num_classes(), feats.cols());
  std::vector<long> counts(static_cast<size_t>(clf.num_classes()), 0);
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    int y = labels[static_cast<size_t>(i)];
    scorer.centroids.row(y) += feats.row(i);
    counts[static_cast<size_t>(y)]++;
  }
  for (int c = 0; c < clf.num_classes(); ++c)
    if (counts[static_cast<size_t>(c)] > 0)
      scorer.centroids.row(c) /=
          static_cast<double>(counts[static_cast<size_t>(c)]);
  return scorer;
}

std::vector<double> knn_scores(const KnnScorer& scorer, IntentClassifier& clf,
                               const std::vector<TokenSequence>& xs) {
  Matrix feats = features_batch(clf, xs);
  std::vector<double> out(xs.size());
  for (Eigen::Index i = 0; i < feats.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < scorer.centroids.rows(); ++c)
      best = std::min(best,
                      (feats.row(i) - scorer.centroids.row(c)).norm());
    out[static_cast<size_t>(i)] = -best;
  }
  return out;
}

double score_knn(const KnnScorer& scorer, IntentClassifier& clf,
                 const TokenSequence& x) {
  return knn_scores(scorer, clf, {x})[0];
}

double classification_accuracy(IntentClassifier& clf,
                               const std::vector<TokenSequence>& xs,
                               const std::vector<int>& labels) {
  if (xs.empty()) return 0.0;
  Matrix probs = predict_batch(clf, xs);
  long hits = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg;
    probs.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[static_cast<size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

}  // namespace pog

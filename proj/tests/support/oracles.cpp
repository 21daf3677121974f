// oracles.cpp
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

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pog::test {

double auroc_pairwise(const ScoredSet& s) {
  double total = 0.0;
  for (double ind : s.ind_scores) {
    for (double ood : s.ood_scores) {
      if (ind > ood)
        total += 1.0;
      else if (ind == ood)
        total += 0.5;
    }
  }
  return total / (static_cast<double>(s.ind_scores.size()) *
                  static_cast<double>(s.ood_scores.size()));
}

double aupr_threshold_sweep(const ScoredSet& s) {
  // OOD positive; predict positive when score <= t. Recount from scratch at
  // every distinct observed score, ascending.
  std::set<double> thresholds(s.ind_scores.begin(), s.ind_scores.end());
  thresholds.insert(s.ood_scores.begin(), s.ood_scores.end());
  double prev_recall = 0.0;
  double area = 0.0;
  for (double t : thresholds) {
    long tp = 0, fp = 0;
    for (double v : s.ood_scores)
      if (v <= t) ++tp;
    for (double v : s.ind_scores)
      if (v <= t) ++fp;
    if (tp + fp == 0) continue;
    double recall = static_cast<double>(tp) /
                    static_cast<double>(s.ood_scores.size());
    double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double fpr_at_tpr_sweep(const ScoredSet& s, double n_percent) {
  // Try every observed IND score as the threshold, keep the largest that
  // reaches the required TPR, recounting everything per candidate.
  double best_t = 0.0;
  bool found = false;
  for (double t : s.ind_scores) {
    long tp = 0;
    for (double v : s.ind_scores)
      if (v >= t) ++tp;
    double tpr = static_cast<double>(tp) /
                 static_cast<double>(s.ind_scores.size());
    if (tpr * 100.0 >= n_percent - 1e-9) {
      if (!found || t > best_t) {
        best_t = t;
        found = true;
      }
    }
  }
  if (!found) best_t = *std::min_element(s.ind_scores.begin(),
                                         s.ind_scores.end());
  long fp = 0;
  for (double v : s.ood_scores)
    if (v >= best_t) ++fp;
  return static_cast<double>(fp) / static_cast<double>(s.ood_scores.size());
}

double energy_distance(const Matrix& a, const Matrix& b) {
  auto mean_pair = [](const Matrix& x, const Matrix& y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < y.rows(); ++j)
        total += (x.row(i) - y.row(j)).norm();
    return total / (static_cast<double>(x.rows()) *
                    static_cast<double>(y.rows()));
  };
  return 2.0 * mean_pair(a, b) - mean_pair(a, a) - mean_pair(b, b);
}

}  // namespace pog::test

// oracles.hpp
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

#include "pog/detection.hpp"

namespace pog::test {

// Brute-force counterparts of the detection metrics, kept deliberately
// independent of the library implementations: quadratic pair counting and
// exhaustive threshold recounts.

double auroc_pairwise(const ScoredSet& s);
double aupr_threshold_sweep(const ScoredSet& s);
double fpr_at_tpr_sweep(const ScoredSet& s, double n_percent);

// Energy distance between two samples of row vectors.
double energy_distance(const Matrix& a, const Matrix& b);

}  // namespace pog::test

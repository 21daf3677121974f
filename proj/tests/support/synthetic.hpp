// synthetic.hpp
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

#include <string>
#include <vector>

#include "pog/corpus.hpp"

namespace pog::test {

// Templated corpus: six device-assistant intents plus two held-out utterance
// families (cooking and car questions) that reuse the same carrier phrases
// and slot words, so the held-out families are lexically close to the
// in-domain data.
struct SyntheticCounts {
  int train_per_intent = 80;
  int val_per_intent = 15;
  int test_per_intent = 25;
  int ood_val = 40;
  int ood_test = 120;
  int mix_ind = 180;
  int mix_ood = 20;
};

struct SyntheticRecord {
  std::string text;
  std::string label;  // empty = unlabeled
  std::string split;
};

std::vector<SyntheticRecord> generate_synthetic(const SyntheticCounts& counts,
                                                std::uint64_t seed);

// Writes line-delimited records loadable by load_bundle.
void write_synthetic_dataset(const std::string& path,
                             const SyntheticCounts& counts,
                             std::uint64_t seed);

// Distinct tokens across all records, for sanity checks.
int synthetic_vocab_size(const std::vector<SyntheticRecord>& records);

}  // namespace pog::test

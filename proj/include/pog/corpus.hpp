// corpus.hpp
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

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pog/rng.hpp"

namespace pog {

using Tokens = std::vector<std::string>;

// Token/id map with reserved specials at fixed ids.
struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kNumSpecials = 4;

  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token;
  int min_count = 1;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_of(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
  }
  // FNV-1a over the id-ordered token list; pins checkpoints to a vocabulary.
  std::string hash() const;
};

// BOS-prefixed, EOS-terminated, PAD-right ids.
struct TokenSequence {
  std::vector<int> ids;
  int length = 0;  // includes BOS and EOS, excludes PAD

  int max_len() const { return static_cast<int>(ids.size()); }
  bool operator==(const TokenSequence&) const = default;
};

struct LabeledExample {
  TokenSequence sequence;
  std::optional<int> label;
};

enum class Split { kIndTrain, kIndVal, kIndTest, kOodVal, kOodTest, kMix };

std::optional<Split> parse_split(const std::string& tag);
std::string split_name(Split s);

// One dataset record after tokenization; labels stay as strings until the
// label space is fixed.
struct RawRecord {
  Tokens tokens;
  std::optional<std::string> label;
  Split split = Split::kIndTrain;
};

// Loaded dataset. Token lists are kept raw because the intent classifier and
// the generation model use different vocabularies; encoding happens per
// consumer via encode()/encode_split().
struct DatasetBundle {
  std::vector<Tokens> ind_train, ind_val, ind_test;
  std::vector<int> ind_train_labels, ind_val_labels, ind_test_labels;
  std::vector<Tokens> ood_val, ood_test, mix;
  std::vector<std::string> label_names;  // sorted; index = label id
  std::vector<std::string> warnings;     // dedup notes, one per dropped record

  int num_classes() const { return static_cast<int>(label_names.size()); }
};

Tokens tokenize(const std::string& text);

// Frequency-ordered vocabulary over `texts`; ties broken lexicographically.
Vocabulary build_vocab(const std::vector<Tokens>& texts, int min_count);

TokenSequence encode(const Tokens& text, const Vocabulary& vocab, int max_len);
Tokens decode_tokens(const TokenSequence& seq, const Vocabulary& vocab);
std::string decode_text(const TokenSequence& seq, const Vocabulary& vocab);

// Independently replaces each non-special token with a uniformly random
// non-special vocabulary token with probability `rate`.
TokenSequence perturb(const TokenSequence& seq, double rate,
                      const Vocabulary& vocab, RandomSource& rng);

// Line-delimited records {"text": str, "label": str|null, "split": tag}.
DatasetBundle load_bundle(const std::string& path);

std::vector<TokenSequence> encode_split(const std::vector<Tokens>& texts,
                                        const Vocabulary& vocab, int max_len);

// Texts of the line-delimited {"text": ...} sample files emitted by the
// generation commands.
std::vector<Tokens> load_text_lines(const std::string& path);
void save_text_lines(const std::string& path,
                     const std::vector<std::string>& texts);

}  // namespace pog

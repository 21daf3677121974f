// corpus.cpp
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

#include "pog/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pog {

namespace {

const char* kSpecialNames[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

}  // namespace

std::string Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (const std::string& tok : id_to_token) {
    for (unsigned char c : tok) mix(c);
    mix('\n');
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::optional<Split> parse_split(const std::string& tag) {
  if (tag == "ind_train") return Split::kIndTrain;
  if (tag == "ind_val") return Split::kIndVal;
  if (tag == "ind_test") return Split::kIndTest;
  if (tag == "ood_val") return Split::kOodVal;
  if (tag == "ood_test") return Split::kOodTest;
  if (tag == "mix") return Split::kMix;
  return std::nullopt;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kIndTrain: return "ind_train";
    case Split::kIndVal: return "ind_val";
    case Split::kIndTest: return "ind_test";
    case Split::kOodVal: return "ood_val";
    case Split::kOodTest: return "ood_test";
    case Split::kMix: return "mix";
  }
  return "?";
}

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Vocabulary build_vocab(const std::vector<Tokens>& texts, int min_count) {
  if (texts.empty()) throw std::invalid_argument("empty corpus");
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");

  std::map<std::string, long> freq;
  for (const Tokens& text : texts)
    for (const std::string& tok : text) ++freq[tok];

  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, count] : freq) {
    if (count < min_count) continue;
    bool is_special = false;
    for (const char* s : kSpecialNames)
      if (tok == s) is_special = true;
    if (!is_special) kept.emplace_back(tok, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count = min_count;
  for (const char* s : kSpecialNames) {
    v.token_to_id.emplace(s, static_cast<int>(v.id_to_token.size()));
    v.id_to_token.emplace_back(s);
  }
  for (const auto& [tok, count] : kept) {
    v.token_to_id.emplace(tok, static_cast<int>(v.id_to_token.size()));
    v.id_to_token.push_back(tok);
  }
  return v;
}

TokenSequence encode(const Tokens& text, const Vocabulary& vocab, int max_len) {
  if (max_len < 3) throw std::invalid_argument("encode: max_len must be >= 3");
  TokenSequence seq;
  seq.ids.assign(static_cast<size_t>(max_len), Vocabulary::kPad);
  seq.ids[0] = Vocabulary::kBos;
  int pos = 1;
  int keep = std::min<int>(static_cast<int>(text.size()), max_len - 2);
  for (int i = 0; i < keep; ++i)
    seq.ids[static_cast<size_t>(pos++)] = vocab.id_of(text[static_cast<size_t>(i)]);
  seq.ids[static_cast<size_t>(pos++)] = Vocabulary::kEos;
  seq.length = pos;
  return seq;
}

Tokens decode_tokens(const TokenSequence& seq, const Vocabulary& vocab) {
  Tokens out;
  for (int i = 1; i + 1 < seq.length; ++i)
    out.push_back(vocab.id_to_token[static_cast<size_t>(seq.ids[static_cast<size_t>(i)])]);
  return out;
}

std::string decode_text(const TokenSequence& seq, const Vocabulary& vocab) {
  Tokens toks = decode_tokens(seq, vocab);
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

TokenSequence perturb(const TokenSequence& seq, double rate,
                      const Vocabulary& vocab, RandomSource& rng) {
  if (rate < 0.0 || rate > 1.0)
    throw std::invalid_argument("perturb: rate outside [0, 1]");
  TokenSequence out = seq;
  int lo = Vocabulary::kNumSpecials;
  int hi = vocab.size() - 1;
  if (hi < lo) return out;  // vocabulary with only specials: nothing to draw
  for (int i = 0; i < out.length; ++i) {
    int id = out.ids[static_cast<size_t>(i)];
    if (id < Vocabulary::kNumSpecials) continue;
    if (rng.uniform() < rate)
      out.ids[static_cast<size_t>(i)] = rng.uniform_int(lo, hi);
  }
  return out;
}

DatasetBundle load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);

  struct Item {
    Tokens tokens;
    std::optional<std::string> label;
    Split split;
  };
  std::vector<Item> items;
  std::set<std::string> labels_seen;

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("malformed record at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.contains("text") || !rec.contains("split"))
      throw std::runtime_error("malformed record at line " +
                               std::to_string(line_no) +
                               ": missing text or split field");
    auto split = parse_split(rec["split"].get<std::string>());
    if (!split)
      throw std::runtime_error("unknown split tag at line " +
                               std::to_string(line_no) + ": " +
                               rec["split"].get<std::string>());
    Item item;
    item.tokens = tokenize(rec["text"].get<std::string>());
    item.split = *split;
    if (rec.contains("label") && !rec["label"].is_null())
      item.label = rec["label"].get<std::string>();
    bool needs_label = item.split == Split::kIndTrain ||
                       item.split == Split::kIndVal ||
                       item.split == Split::kIndTest;
    if (needs_label && !item.label)
      throw std::runtime_error("missing label at line " +
                               std::to_string(line_no) + " for split " +
                               split_name(item.split));
    if (needs_label) labels_seen.insert(*item.label);
    items.push_back(std::move(item));
  }

  DatasetBundle bundle;
  bundle.label_names.assign(labels_seen.begin(), labels_seen.end());
  std::map<std::string, int> label_id;
  for (size_t i = 0; i < bundle.label_names.size(); ++i)
    label_id[bundle.label_names[i]] = static_cast<int>(i);

  auto key_of = [](const Tokens& toks) {
    std::string k;
    for (const auto& t : toks) {
      k += t;
      k += ' ';
    }
    return k;
  };
  // Anything used in training (labeled or mixed) bars the same text from the
  // test splits.
  std::set<std::string> train_keys;
  for (const Item& item : items)
    if (item.split == Split::kIndTrain || item.split == Split::kMix)
      train_keys.insert(key_of(item.tokens));

  for (const Item& item : items) {
    bool test_split =
        item.split == Split::kIndTest || item.split == Split::kOodTest;
    if (test_split && train_keys.count(key_of(item.tokens))) {
      bundle.warnings.push_back("dropped duplicate of a training sequence from " +
                                split_name(item.split));
      continue;
    }
    switch (item.split) {
      case Split::kIndTrain:
        bundle.ind_train.push_back(item.tokens);
        bundle.ind_train_labels.push_back(label_id[*item.label]);
        break;
      case Split::kIndVal:
        bundle.ind_val.push_back(item.tokens);
        bundle.ind_val_labels.push_back(label_id[*item.label]);
        break;
      case Split::kIndTest:
        bundle.ind_test.push_back(item.tokens);
        bundle.ind_test_labels.push_back(label_id[*item.label]);
        break;
      case Split::kOodVal: bundle.ood_val.push_back(item.tokens); break;
      case Split::kOodTest: bundle.ood_test.push_back(item.tokens); break;
      case Split::kMix: bundle.mix.push_back(item.tokens); break;
    }
  }
  return bundle;
}

std::vector<TokenSequence> encode_split(const std::vector<Tokens>& texts,
                                        const Vocabulary& vocab, int max_len) {
  std::vector<TokenSequence> out;
  out.reserve(texts.size());
  for (const Tokens& t : texts) out.push_back(encode(t, vocab, max_len));
  return out;
}

std::vector<Tokens> load_text_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sample file: " + path);
  std::vector<Tokens> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("malformed sample at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(tokenize(rec.at("text").get<std::string>()));
  }
  return out;
}

void save_text_lines(const std::string& path,
                     const std::vector<std::string>& texts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sample file: " + path);
  for (const std::string& t : texts) {
    nlohmann::json rec;
    rec["text"] = t;
    out << rec.dump() << "\n";
  }
}

}  // namespace pog

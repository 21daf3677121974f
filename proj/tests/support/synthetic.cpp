// synthetic.cpp
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

#include "support/synthetic.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pog/rng.hpp"

namespace pog::test {

namespace {

using Pool = std::vector<std::string>;

const std::map<std::string, Pool>& slot_pools() {
  static const std::map<std::string, Pool> pools = {
      {"NUM", {"one", "two", "three", "four", "five", "six", "seven", "eight",
               "nine", "ten"}},
      {"DAY", {"monday", "tuesday", "wednesday", "thursday", "friday",
               "saturday", "sunday"}},
      {"PART", {"morning", "afternoon", "evening", "night"}},
      {"CITY", {"boston", "seattle", "denver", "austin", "chicago", "miami",
                "portland", "dallas"}},
      {"LANG", {"french", "spanish", "german", "italian", "japanese", "korean",
                "dutch", "polish"}},
      {"GENRE", {"jazz", "rock", "pop", "classical", "country", "blues"}},
      {"MIN", {"five", "ten", "fifteen", "twenty", "thirty", "forty"}},
      {"WORD", {"hello", "goodbye", "thanks", "water", "coffee", "friend",
                "house", "dog"}},
      {"NAME", {"ana", "mark", "lee", "sara", "noah", "kate", "omar", "ravi"}},
      {"FOOD", {"eggs", "rice", "pasta", "chicken", "soup", "bread", "beans",
                "fish"}},
  };
  return pools;
}

const std::map<std::string, std::vector<std::string>>& intent_templates() {
  static const std::map<std::string, std::vector<std::string>> templates = {
      {"alarm",
       {"set an alarm for NUM in the PART", "wake me up at NUM",
        "please set my alarm to NUM", "cancel the alarm for the PART",
        "can you wake me at NUM tomorrow", "i need an alarm on DAY at NUM",
        "turn off my PART alarm", "set a new alarm for DAY PART",
        "is my alarm set for NUM", "change the alarm from NUM to NUM"}},
      {"weather",
       {"what is the weather in CITY", "will it rain in CITY on DAY",
        "how cold is it in CITY today", "give me the forecast for CITY",
        "do i need an umbrella in CITY",
        "what is the temperature in CITY this PART",
        "is it snowing in CITY right now", "weather report for DAY please",
        "how warm will CITY be on DAY", "check the forecast for DAY in CITY"}},
      {"music",
       {"play some GENRE music", "play GENRE for me please",
        "turn on my GENRE playlist", "skip this song and play GENRE",
        "pause the music now", "turn the volume up please",
        "play my DAY playlist", "i want to hear GENRE tonight",
        "play the top GENRE songs", "stop the music please"}},
      {"timer",
       {"start a timer for MIN minutes", "set a MIN minute timer",
        "how much time is left on my timer", "cancel the timer please",
        "pause my timer now", "add MIN minutes to the timer",
        "start a second timer for MIN minutes", "set a timer for NUM hours",
        "reset the timer to MIN minutes", "stop the timer when it hits MIN"}},
      {"translate",
       {"translate hello to LANG", "how do you say WORD in LANG",
        "translate this phrase into LANG", "what is WORD in LANG",
        "say WORD in LANG for me", "can you translate WORD to LANG",
        "i need the LANG word for WORD",
        "translate WORD from english to LANG",
        "give me the LANG translation of WORD", "speak WORD in LANG"}},
      {"calendar",
       {"schedule a meeting on DAY at NUM",
        "add an event to my calendar for DAY", "cancel my DAY meeting",
        "move my meeting to DAY PART", "what is on my calendar for DAY",
        "book a call with NAME on DAY",
        "remind me about the meeting on DAY", "set up lunch with NAME on DAY",
        "clear my calendar for DAY PART",
        "when is my next meeting with NAME"}},
  };
  return templates;
}

const std::vector<std::string>& ood_templates() {
  static const std::vector<std::string> templates = {
      // held-out family: cooking
      "how long do i cook FOOD", "what is the best way to boil FOOD",
      "give me a recipe for FOOD soup", "how do you bake FOOD at home",
      "can i fry FOOD in butter", "how much salt goes in the FOOD",
      "what temperature do i roast FOOD at",
      "is it safe to reheat FOOD twice",
      "how many minutes do i steam FOOD", "do i need oil to cook FOOD",
      // held-out family: car
      "how much is my car worth now",
      "when should i change the oil in my car",
      "can you check the tires on my car",
      "why is the engine light on in my car",
      "where can i park near the office",
      "how long does the battery last in my car",
      "is my car due for service on DAY",
      "what do new brakes cost for my car",
      "can i drive to CITY on one tank", "how far is CITY from here by car"};
  return templates;
}

// Carrier words shared by every template, in-domain and held-out alike.
const Pool& prefix_pool() {
  static const Pool pool = {"", "please", "hey", "ok", "now"};
  return pool;
}
const Pool& suffix_pool() {
  static const Pool pool = {"", "please", "now", "thanks", "today"};
  return pool;
}

class TemplateSampler {
 public:
  explicit TemplateSampler(std::uint64_t seed) : rng_(seed) {}

  std::string fill(const std::string& tmpl) {
    std::string out = pick(prefix_pool());
    std::istringstream in(tmpl);
    std::string word;
    while (in >> word) {
      const auto& pools = slot_pools();
      auto it = pools.find(word);
      if (it != pools.end()) word = pick(it->second);
      append(out, word);
    }
    append(out, pick(suffix_pool()));
    return out;
  }

  // Globally unique sentence from a uniformly chosen template.
  std::string unique_from(const std::vector<std::string>& templates) {
    for (int attempt = 0; attempt < 500; ++attempt) {
      const std::string& tmpl = templates[static_cast<size_t>(
          rng_.uniform_int(0, static_cast<int>(templates.size()) - 1))];
      std::string text = fill(tmpl);
      if (seen_.insert(text).second) return text;
    }
    throw std::runtime_error(
        "synthetic corpus: template space exhausted; reduce counts");
  }

 private:
  std::string pick(const Pool& pool) {
    return pool[static_cast<size_t>(
        rng_.uniform_int(0, static_cast<int>(pool.size()) - 1))];
  }
  static void append(std::string& out, const std::string& word) {
    if (word.empty()) return;
    if (!out.empty()) out += ' ';
    out += word;
  }

  RandomSource rng_;
  std::set<std::string> seen_;
};

}  // namespace

std::vector<SyntheticRecord> generate_synthetic(const SyntheticCounts& counts,
                                                std::uint64_t seed) {
  TemplateSampler sampler(seed);
  std::vector<SyntheticRecord> records;

  for (const auto& [intent, templates] : intent_templates()) {
    for (int i = 0; i < counts.train_per_intent; ++i)
      records.push_back({sampler.unique_from(templates), intent, "ind_train"});
    for (int i = 0; i < counts.val_per_intent; ++i)
      records.push_back({sampler.unique_from(templates), intent, "ind_val"});
    for (int i = 0; i < counts.test_per_intent; ++i)
      records.push_back({sampler.unique_from(templates), intent, "ind_test"});
  }
  for (int i = 0; i < counts.ood_val; ++i)
    records.push_back({sampler.unique_from(ood_templates()), "", "ood_val"});
  for (int i = 0; i < counts.ood_test; ++i)
    records.push_back({sampler.unique_from(ood_templates()), "", "ood_test"});

  // Unlabeled mixture: mostly in-domain sentences plus a slice drawn from the
  // held-out families.
  std::vector<std::vector<std::string>> intent_order;
  for (const auto& [intent, templates] : intent_templates())
    intent_order.push_back(templates);
  RandomSource mix_rng(seed ^ 0x5eedu);
  for (int i = 0; i < counts.mix_ind; ++i) {
    const auto& templates = intent_order[static_cast<size_t>(
        mix_rng.uniform_int(0, static_cast<int>(intent_order.size()) - 1))];
    records.push_back({sampler.unique_from(templates), "", "mix"});
  }
  for (int i = 0; i < counts.mix_ood; ++i)
    records.push_back({sampler.unique_from(ood_templates()), "", "mix"});

  return records;
}

void write_synthetic_dataset(const std::string& path,
                             const SyntheticCounts& counts,
                             std::uint64_t seed) {
  std::vector<SyntheticRecord> records = generate_synthetic(counts, seed);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (const SyntheticRecord& r : records) {
    nlohmann::json j;
    j["text"] = r.text;
    if (r.label.empty())
      j["label"] = nullptr;
    else
      j["label"] = r.label;
    j["split"] = r.split;
    out << j.dump() << "\n";
  }
}

int synthetic_vocab_size(const std::vector<SyntheticRecord>& records) {
  std::set<std::string> words;
  for (const SyntheticRecord& r : records) {
    std::istringstream in(r.text);
    std::string w;
    while (in >> w) words.insert(w);
  }
  return static_cast<int>(words.size());
}

}  // namespace pog::test

// test_corpus.cpp
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "pog/corpus.hpp"

using namespace pog;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/pog_corpus_") + name;
}

}  // namespace

TEST_CASE("build_vocab ordering, cutoff and determinism") {
  std::vector<Tokens> texts = {{"a", "b"}, {"a"}};

  SUBCASE("frequency ordering with specials reserved") {
    Vocabulary v = build_vocab(texts, 1);
    CHECK(v.size() == 6);
    CHECK(v.id_of("a") == 4);
    CHECK(v.id_of("b") == 5);
    CHECK(v.id_to_token[0] == "<pad>");
    CHECK(v.id_to_token[3] == "<eos>");
  }

  SUBCASE("min_count cutoff") {
    Vocabulary v = build_vocab(texts, 2);
    CHECK(v.size() == 5);
    CHECK(v.id_of("a") == 4);
    CHECK(v.id_of("b") == Vocabulary::kUnk);
  }

  SUBCASE("ties break lexicographically") {
    Vocabulary v = build_vocab({{"zebra", "apple"}}, 1);
    CHECK(v.id_of("apple") == 4);
    CHECK(v.id_of("zebra") == 5);
  }

  SUBCASE("empty corpus errors") {
    CHECK_THROWS_WITH_AS(build_vocab({}, 1), "empty corpus",
                         std::invalid_argument);
  }

  SUBCASE("deterministic over repeated builds") {
    RandomSource rng(42);
    std::vector<Tokens> random_texts;
    for (int i = 0; i < 200; ++i) {
      Tokens t;
      for (int j = 0; j < 5; ++j)
        t.push_back("w" + std::to_string(rng.uniform_int(0, 60)));
      random_texts.push_back(t);
    }
    Vocabulary v1 = build_vocab(random_texts, 2);
    Vocabulary v2 = build_vocab(random_texts, 2);
    CHECK(v1.id_to_token == v2.id_to_token);
    CHECK(v1.hash() == v2.hash());
  }

  SUBCASE("frequency recount oracle over random corpus") {
    RandomSource rng(7);
    std::vector<Tokens> random_texts;
    for (int i = 0; i < 1000; ++i) {
      Tokens t;
      int len = rng.uniform_int(1, 8);
      for (int j = 0; j < len; ++j)
        t.push_back("tok" + std::to_string(rng.uniform_int(0, 300)));
      random_texts.push_back(t);
    }
    int min_count = 3;
    Vocabulary v = build_vocab(random_texts, min_count);
    std::map<std::string, long> recount;
    for (const Tokens& t : random_texts)
      for (const std::string& w : t) ++recount[w];
    for (int id = Vocabulary::kNumSpecials; id < v.size(); ++id)
      CHECK(recount[v.id_to_token[static_cast<size_t>(id)]] >= min_count);
    for (const auto& [tok, count] : recount) {
      bool kept = v.token_to_id.count(tok) > 0;
      CHECK(kept == (count >= min_count));
    }
  }
}

TEST_CASE("encode") {
  Vocabulary v = build_vocab({{"hello", "world"}}, 1);

  SUBCASE("bos content eos pad layout") {
    TokenSequence s = encode({"hello"}, v, 6);
    CHECK(s.ids == std::vector<int>{Vocabulary::kBos, v.id_of("hello"),
                                    Vocabulary::kEos, Vocabulary::kPad,
                                    Vocabulary::kPad, Vocabulary::kPad});
    CHECK(s.length == 3);
  }

  SUBCASE("unknown token maps to unk") {
    TokenSequence s = encode({"martian"}, v, 6);
    CHECK(s.ids[1] == Vocabulary::kUnk);
  }

  SUBCASE("truncation keeps first max_len-2 tokens then eos") {
    Tokens longtext(200, "hello");
    TokenSequence s = encode(longtext, v, 10);
    CHECK(s.length == 10);
    CHECK(s.ids[9] == Vocabulary::kEos);
    for (int i = 1; i < 9; ++i)
      CHECK(s.ids[static_cast<size_t>(i)] == v.id_of("hello"));
  }

  SUBCASE("round-trips in-vocabulary text below the cap") {
    Tokens text = {"hello", "world", "hello"};
    TokenSequence s = encode(text, v, 8);
    CHECK(decode_tokens(s, v) == text);
  }

  SUBCASE("max_len below 3 errors") {
    CHECK_THROWS_AS(encode({"hello"}, v, 2), std::invalid_argument);
  }
}

TEST_CASE("perturb") {
  std::vector<Tokens> texts;
  for (int i = 0; i < 40; ++i) texts.push_back({"w" + std::to_string(i)});
  Vocabulary v = build_vocab(texts, 1);
  TokenSequence seq = encode({"w1", "w2", "w3", "w4"}, v, 8);

  SUBCASE("rate zero is identity") {
    RandomSource rng(1);
    CHECK(perturb(seq, 0.0, v, rng) == seq);
  }

  SUBCASE("rate one keeps specials and length") {
    RandomSource rng(2);
    TokenSequence p = perturb(seq, 1.0, v, rng);
    CHECK(p.length == seq.length);
    CHECK(p.ids[0] == Vocabulary::kBos);
    CHECK(p.ids[static_cast<size_t>(p.length - 1)] == Vocabulary::kEos);
    for (int i = p.length; i < p.max_len(); ++i)
      CHECK(p.ids[static_cast<size_t>(i)] == Vocabulary::kPad);
    for (int i = 1; i + 1 < p.length; ++i)
      CHECK(p.ids[static_cast<size_t>(i)] >= Vocabulary::kNumSpecials);
  }

  SUBCASE("monte carlo replacement fraction at rate 0.5") {
    RandomSource rng(3);
    long replaced = 0, total = 0;
    for (int rep = 0; rep < 2500; ++rep) {
      TokenSequence p = perturb(seq, 0.5, v, rng);
      for (int i = 1; i + 1 < p.length; ++i) {
        ++total;
        if (p.ids[static_cast<size_t>(i)] != seq.ids[static_cast<size_t>(i)])
          ++replaced;
      }
    }
    // A replacement draw can land on the original token, so the observed
    // change rate is 0.5 * (1 - 1/n_vocab).
    double expected = 0.5 * (1.0 - 1.0 / 40.0);
    double got = static_cast<double>(replaced) / static_cast<double>(total);
    CHECK(total == 10000);
    CHECK(std::abs(got - expected) < 0.02);
  }

  SUBCASE("fixed seed reproduces bit for bit") {
    RandomSource a(9), b(9);
    CHECK(perturb(seq, 0.3, v, a) == perturb(seq, 0.3, v, b));
  }
}

TEST_CASE("load_bundle") {
  SUBCASE("routing and counts") {
    std::string path = temp_path("routing.jsonl");
    std::ofstream out(path);
    out << R"({"text": "set an alarm", "label": "alarm", "split": "ind_train"})"
        << "\n";
    out << R"({"text": "play a song", "label": "music", "split": "ind_train"})"
        << "\n";
    out << R"({"text": "wake me up", "label": "alarm", "split": "ind_train"})"
        << "\n";
    out << R"({"text": "cook the rice", "label": null, "split": "ood_test"})"
        << "\n";
    out.close();
    DatasetBundle b = load_bundle(path);
    CHECK(b.ind_train.size() == 3);
    CHECK(b.ood_test.size() == 1);
    CHECK(b.num_classes() == 2);
    CHECK(b.label_names == std::vector<std::string>{"alarm", "music"});
    CHECK(b.ind_train_labels == std::vector<int>{0, 1, 0});
    std::remove(path.c_str());
  }

  SUBCASE("malformed line reports the line number") {
    std::string path = temp_path("malformed.jsonl");
    std::ofstream out(path);
    out << R"({"text": "ok", "label": "a", "split": "ind_train"})" << "\n";
    out << "not json\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_bundle(path), doctest::Contains("line 2"),
                         std::runtime_error);
    std::remove(path.c_str());
  }

  SUBCASE("unknown split tag errors") {
    std::string path = temp_path("splittag.jsonl");
    std::ofstream out(path);
    out << R"({"text": "ok", "label": "a", "split": "training"})" << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_bundle(path),
                         doctest::Contains("unknown split tag"),
                         std::runtime_error);
    std::remove(path.c_str());
  }

  SUBCASE("duplicate of a training text is dropped from test with a warning") {
    std::string path = temp_path("dedup.jsonl");
    std::ofstream out(path);
    out << R"({"text": "wake me up", "label": "alarm", "split": "ind_train"})"
        << "\n";
    out << R"({"text": "Wake ME up", "label": "alarm", "split": "ind_test"})"
        << "\n";
    out << R"({"text": "another one", "label": "alarm", "split": "ind_test"})"
        << "\n";
    out.close();
    DatasetBundle b = load_bundle(path);
    CHECK(b.ind_train.size() == 1);
    CHECK(b.ind_test.size() == 1);
    REQUIRE(b.warnings.size() == 1);
    CHECK(b.warnings[0].find("ind_test") != std::string::npos);
    std::remove(path.c_str());
  }

  SUBCASE("full-scale shaped file loads with exact counts") {
    // 15.00K / 3.00K / 4.50K labeled; 0.10K / 1.00K held-out; 10.25K mix
    std::string path = temp_path("fullscale.jsonl");
    {
      std::ofstream out(path);
      auto emit = [&out](int n, const std::string& split, bool labeled,
                         const std::string& prefix) {
        for (int i = 0; i < n; ++i) {
          out << R"({"text": ")" << prefix << " utterance " << i
              << R"(", "label": )"
              << (labeled
                      ? std::string("\"intent") + std::to_string(i % 150) + "\""
                      : "null")
              << R"(, "split": ")" << split << R"("})" << "\n";
        }
      };
      emit(15000, "ind_train", true, "train");
      emit(3000, "ind_val", true, "val");
      emit(4500, "ind_test", true, "test");
      emit(100, "ood_val", false, "oodval");
      emit(1000, "ood_test", false, "oodtest");
      emit(10250, "mix", false, "mix");
    }
    DatasetBundle b = load_bundle(path);
    CHECK(b.ind_train.size() == 15000);
    CHECK(b.ind_val.size() == 3000);
    CHECK(b.ind_test.size() == 4500);
    CHECK(b.ood_val.size() == 100);
    CHECK(b.ood_test.size() == 1000);
    CHECK(b.mix.size() == 10250);
    std::remove(path.c_str());
  }
}

TEST_CASE("tokenize lowercases and splits on whitespace") {
  CHECK(tokenize("Set An  ALARM\tplease") ==
        Tokens{"set", "an", "alarm", "please"});
  CHECK(tokenize("").empty());
}

TEST_CASE("sample file round trip") {
  std::string path = temp_path("samples.jsonl");
  save_text_lines(path, {"alpha beta", "gamma"});
  std::vector<Tokens> texts = load_text_lines(path);
  REQUIRE(texts.size() == 2);
  CHECK(texts[0] == Tokens{"alpha", "beta"});
  CHECK(texts[1] == Tokens{"gamma"});
  std::remove(path.c_str());
}

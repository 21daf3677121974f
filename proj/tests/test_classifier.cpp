// test_classifier.cpp
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

#include <cmath>

#include "pog/classifier.hpp"
#include "pog/detection.hpp"
#include "pog/errors.hpp"
#include "support/finite_diff.hpp"

using namespace pog;

namespace {

// Tiny vocabulary of class-specific token pools; class c draws words c0..c9.
Vocabulary toy_vocab(int num_classes) {
  std::vector<Tokens> texts;
  for (int c = 0; c < num_classes; ++c) {
    Tokens t;
    for (int w = 0; w < 10; ++w)
      t.push_back("c" + std::to_string(c) + "w" + std::to_string(w));
    texts.push_back(t);
  }
  texts.push_back({"x0", "x1", "x2", "x3", "x4", "x5", "x6", "x7"});
  return build_vocab(texts, 1);
}

Tokens class_sentence(int c, RandomSource& rng, int len) {
  Tokens t;
  for (int i = 0; i < len; ++i)
    t.push_back("c" + std::to_string(c) + "w" +
                std::to_string(rng.uniform_int(0, 9)));
  return t;
}

Tokens ood_sentence(RandomSource& rng, int len) {
  Tokens t;
  for (int i = 0; i < len; ++i)
    t.push_back("x" + std::to_string(rng.uniform_int(0, 7)));
  return t;
}

ClassifierConfig small_config() {
  ClassifierConfig cfg;
  cfg.max_len = 8;
  cfg.embed_dim = 12;
  cfg.kernel_widths = {2, 3};
  cfg.feature_maps = 8;
  cfg.hidden = 24;
  cfg.hidden_layers = 2;
  cfg.dropout = 0.5;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.lr = 2e-3;
  return cfg;
}

DatasetBundle separable_bundle(int num_classes, int train_per_class,
                               int val_per_class, std::uint64_t seed) {
  DatasetBundle b;
  RandomSource rng(seed);
  for (int c = 0; c < num_classes; ++c)
    b.label_names.push_back("class" + std::to_string(c));
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < train_per_class; ++i) {
      b.ind_train.push_back(class_sentence(c, rng, rng.uniform_int(3, 6)));
      b.ind_train_labels.push_back(c);
    }
    for (int i = 0; i < val_per_class; ++i) {
      b.ind_val.push_back(class_sentence(c, rng, rng.uniform_int(3, 6)));
      b.ind_val_labels.push_back(c);
    }
  }
  return b;
}

}  // namespace

TEST_CASE("predict basics") {
  Vocabulary v = toy_vocab(4);
  ClassifierConfig cfg = small_config();
  RandomSource rng(1);
  IntentClassifier clf(cfg, v, {"a", "b", "c", "d"}, rng);
  TokenSequence x = encode(class_sentence(0, rng, 4), v, cfg.max_len);

  SUBCASE("zeroed output layer gives the uniform distribution") {
    clf.net.out.w.value.setZero();
    clf.net.out.b.value.setZero();
    PredictedDistribution d = predict(clf, x);
    for (int i = 0; i < 4; ++i) CHECK(d.probs(i) == 0.25);
  }

  SUBCASE("probabilities sum to one over random inputs") {
    for (int i = 0; i < 100; ++i) {
      TokenSequence xi =
          encode(class_sentence(i % 4, rng, rng.uniform_int(2, 6)), v,
                 cfg.max_len);
      PredictedDistribution d = predict(clf, xi);
      CHECK(d.probs.sum() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(d.probs.minCoeff() >= 0.0);
    }
  }

  SUBCASE("crafted logits 2,0,0 give the closed-form softmax") {
    RandomSource r2(2);
    IntentClassifier c3(cfg, v, {"a", "b", "c"}, r2);
    c3.net.out.w.value.setZero();
    c3.net.out.b.value << 2.0, 0.0, 0.0;
    PredictedDistribution d = predict(c3, x);
    CHECK(d.probs(0) == doctest::Approx(0.786986).epsilon(1e-5));
    CHECK(d.probs(1) == doctest::Approx(0.106507).epsilon(1e-5));
    CHECK(d.probs(2) == doctest::Approx(0.106507).epsilon(1e-5));
  }

  SUBCASE("sequence longer than max_len errors") {
    TokenSequence big = encode(class_sentence(0, rng, 4), v, 32);
    CHECK_THROWS_AS(predict(clf, big), std::invalid_argument);
  }

  SUBCASE("prediction is deterministic despite training dropout") {
    Matrix p1 = predict_batch(clf, {x});
    Matrix p2 = predict_batch(clf, {x});
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("detection_score") {
  SUBCASE("uniform and dominant entries") {
    PredictedDistribution uniform{Vector::Constant(4, 0.25)};
    CHECK(detection_score(uniform) == 0.25);
    Vector p(3);
    p << 0.7, 0.2, 0.1;
    CHECK(detection_score({p}) == 0.7);
  }

  SUBCASE("matches a linear scan over random distributions") {
    RandomSource rng(5);
    for (int i = 0; i < 1000; ++i) {
      int m = rng.uniform_int(2, 10);
      Vector p(m);
      double sum = 0;
      for (int j = 0; j < m; ++j) {
        p(j) = rng.uniform() + 1e-9;
        sum += p(j);
      }
      p /= sum;
      double scan = p(0);
      for (int j = 1; j < m; ++j) scan = std::max(scan, p(j));
      CHECK(detection_score({p}) == scan);
    }
  }

  SUBCASE("invariant under consistent class permutation") {
    RandomSource rng(6);
    Vector p(5);
    p << 0.1, 0.4, 0.2, 0.05, 0.25;
    std::vector<int> perm = {3, 0, 4, 1, 2};
    Vector q(5);
    for (int i = 0; i < 5; ++i) q(perm[static_cast<size_t>(i)]) = p(i);
    CHECK(detection_score({p}) == detection_score({q}));
  }
}

TEST_CASE("cross entropy and entropy regularizer values") {
  Vocabulary v = toy_vocab(4);
  ClassifierConfig cfg = small_config();
  RandomSource rng(3);
  IntentClassifier clf(cfg, v, {"a", "b", "c", "d"}, rng);
  TokenSequence x = encode(class_sentence(1, rng, 4), v, cfg.max_len);

  SUBCASE("uniform prediction gives ln m") {
    clf.net.out.w.value.setZero();
    clf.net.out.b.value.setZero();
    CHECK(cross_entropy_loss(clf, {x}, {2}) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(entropy_regularizer(clf, {x}) ==
          doctest::Approx(-std::log(4.0)).epsilon(1e-12));
  }

  SUBCASE("confident correct prediction gives ~zero loss") {
    clf.net.out.w.value.setZero();
    clf.net.out.b.value << 0.0, 60.0, 0.0, 0.0;
    CHECK(cross_entropy_loss(clf, {x}, {1}) < 1e-12);
    CHECK(entropy_regularizer(clf, {x}) > -1e-12);
    CHECK(entropy_regularizer(clf, {x}) <= 0.0);
  }

  SUBCASE("hand-evaluated two-example batch") {
    // p(true) = 0.5 and 0.25 via crafted logit rows.
    ad::Tape tape;
    Matrix logits(2, 4);
    logits.row(0) << std::log(3.0), 0, 0, 0;  // softmax -> 0.5 on class 0
    logits.row(1) << 0, 0, 0, 0;              // softmax -> 0.25 each
    ad::Var loss = nn::nll_loss(tape, tape.leaf(logits), {0, 0});
    CHECK(loss.scalar() ==
          doctest::Approx((std::log(2.0) + std::log(4.0)) / 2.0)
              .epsilon(1e-12));
  }

  SUBCASE("two-mass entropy case") {
    ad::Tape tape;
    Matrix logits(1, 4);
    logits << 10.0, 10.0, -40.0, -40.0;  // probs ~ [0.5, 0.5, 0, 0]
    ad::Var neg_h = nn::mean_negative_entropy(tape, tape.leaf(logits));
    CHECK(neg_h.scalar() == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
    Vector p(4);
    p << 0.5, 0.5, 0.0, 0.0;  // direct evaluation with 0*log0 = 0
    CHECK(shannon_entropy(p) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("label out of range errors") {
    CHECK_THROWS_AS(cross_entropy_loss(clf, {x}, {4}), std::invalid_argument);
    CHECK_THROWS_AS(cross_entropy_loss(clf, {x}, {-1}), std::invalid_argument);
  }

  SUBCASE("entropy regularizer bounded for random parameters") {
    for (int trial = 0; trial < 20; ++trial) {
      RandomSource r(100 + static_cast<std::uint64_t>(trial));
      IntentClassifier c(cfg, v, {"a", "b", "c", "d"}, r);
      double er = entropy_regularizer(c, {x});
      CHECK(er <= 1e-12);
      CHECK(er >= -std::log(4.0) - 1e-12);
    }
  }
}

TEST_CASE("total_loss combines terms") {
  CHECK(total_loss(1.0, -0.5, 1.0) == doctest::Approx(0.5));
  CHECK(total_loss(2.5, -0.7, 0.0) == doctest::Approx(2.5));
  CHECK(total_loss(1.3863, -1.3863, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(total_loss(1.0, 0.0, -0.1), std::invalid_argument);
}

TEST_CASE("gradients of the combined objective match finite differences") {
  Vocabulary v = toy_vocab(2);
  ClassifierConfig cfg;
  cfg.max_len = 8;
  cfg.embed_dim = 5;
  cfg.kernel_widths = {2, 3};
  cfg.feature_maps = 3;
  cfg.hidden = 6;
  cfg.hidden_layers = 2;
  cfg.dropout = 0.0;
  cfg.alpha = 1.0;
  RandomSource rng(11);
  IntentClassifier clf(cfg, v, {"a", "b"}, rng);

  std::vector<TokenSequence> ind = {
      encode(class_sentence(0, rng, 5), v, cfg.max_len),
      encode(class_sentence(1, rng, 3), v, cfg.max_len)};
  std::vector<int> labels = {0, 1};
  std::vector<TokenSequence> er_batch = {
      encode(ood_sentence(rng, 4), v, cfg.max_len),
      encode(ood_sentence(rng, 6), v, cfg.max_len)};

  auto flat = [&](const std::vector<TokenSequence>& xs) {
    std::vector<int> ids;
    for (const auto& s : xs)
      for (int t = 0; t < cfg.max_len; ++t)
        ids.push_back(s.ids[static_cast<size_t>(t)]);
    return ids;
  };

  auto run = [&](bool want, std::vector<Matrix>* grads) {
    ad::Tape tape;
    nn::LeafMap lm(tape);
    ad::Var logits = nn::textcnn_logits(tape, lm, clf.net, flat(ind),
                                        cfg.max_len, nullptr);
    ad::Var ce = nn::nll_loss(tape, logits, labels);
    ad::Var er_logits = nn::textcnn_logits(tape, lm, clf.net, flat(er_batch),
                                           cfg.max_len, nullptr);
    ad::Var er = nn::mean_negative_entropy(tape, er_logits);
    ad::Var loss = ad::add(ce, ad::axpb(er, cfg.alpha, 0.0));
    if (want) {
      auto gs = tape.gradients(loss, lm.leaves());
      grads->clear();
      for (auto& g : gs) grads->push_back(g.value());
    }
    return loss.scalar();
  };

  auto res = test::check_loss_gradients(run, clf.net.params());
  INFO(res.worst);
  CHECK(res.max_rel_err < 1e-3);
}

TEST_CASE("training") {
  Vocabulary v = toy_vocab(4);

  SUBCASE("separable four-class data reaches high validation accuracy") {
    DatasetBundle bundle = separable_bundle(4, 30, 10, 21);
    ClassifierConfig cfg = small_config();
    RandomSource rng(31);
    IntentClassifier clf(cfg, v, bundle.label_names, rng);
    TrainLog log = train_classifier(clf, bundle, {}, rng);
    CHECK(log.best_val_acc >= 0.95);
  }

  SUBCASE("er source pseudo_ood with empty set errors") {
    DatasetBundle bundle = separable_bundle(4, 8, 4, 22);
    ClassifierConfig cfg = small_config();
    cfg.er_source = "pseudo_ood";
    RandomSource rng(32);
    IntentClassifier clf(cfg, v, bundle.label_names, rng);
    CHECK_THROWS_AS(train_classifier(clf, bundle, {}, rng), ConfigError);
  }

  SUBCASE("entropy regularization on true held-out samples lowers their scores") {
    double mean_plain = 0.0, mean_er = 0.0;
    for (std::uint64_t seed : {101ull, 102ull, 103ull}) {
      DatasetBundle bundle = separable_bundle(4, 24, 8, seed);
      RandomSource data_rng(seed + 7);
      std::vector<Tokens> ood_train_texts, ood_eval_texts;
      for (int i = 0; i < 60; ++i)
        ood_train_texts.push_back(ood_sentence(data_rng, 4));
      for (int i = 0; i < 40; ++i)
        ood_eval_texts.push_back(ood_sentence(data_rng, 4));

      ClassifierConfig cfg = small_config();
      cfg.epochs = 6;
      RandomSource rng_a(seed);
      IntentClassifier plain(cfg, v, bundle.label_names, rng_a);
      train_classifier(plain, bundle, {}, rng_a);

      ClassifierConfig cfg_er = cfg;
      cfg_er.er_source = "pseudo_ood";
      RandomSource rng_b(seed);
      IntentClassifier with_er(cfg_er, v, bundle.label_names, rng_b);
      train_classifier(with_er, bundle, ood_train_texts, rng_b);

      std::vector<TokenSequence> eval_x =
          encode_split(ood_eval_texts, v, cfg.max_len);
      for (const TokenSequence& x : eval_x) {
        mean_plain += detection_score(predict(plain, x));
        mean_er += detection_score(predict(with_er, x));
      }
    }
    CHECK(mean_er < mean_plain);
  }

  SUBCASE("fixed seed training is bit-reproducible") {
    DatasetBundle bundle = separable_bundle(3, 10, 4, 23);
    ClassifierConfig cfg = small_config();
    cfg.epochs = 3;
    RandomSource init1(41), init2(41);
    IntentClassifier a(cfg, v, bundle.label_names, init1);
    IntentClassifier b(cfg, v, bundle.label_names, init2);
    RandomSource t1(42), t2(42);
    TrainLog la = train_classifier(a, bundle, {}, t1);
    TrainLog lb = train_classifier(b, bundle, {}, t2);
    REQUIRE(la.epochs.size() == lb.epochs.size());
    for (size_t i = 0; i < la.epochs.size(); ++i) {
      CHECK(la.epochs[i].ce == lb.epochs[i].ce);
      CHECK(la.epochs[i].val_acc == lb.epochs[i].val_acc);
    }
    nn::ParamRefs pa = a.net.params(), pb = b.net.params();
    for (size_t i = 0; i < pa.size(); ++i)
      CHECK((pa[i]->value - pb[i]->value).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("absurd learning rate raises the divergence guard") {
    DatasetBundle bundle = separable_bundle(3, 10, 4, 24);
    ClassifierConfig cfg = small_config();
    cfg.epochs = 40;
    cfg.lr = 1e18;
    RandomSource rng(43);
    IntentClassifier clf(cfg, v, bundle.label_names, rng);
    CHECK_THROWS_AS(train_classifier(clf, bundle, {}, rng), DivergenceError);
  }
}

TEST_CASE("checkpoint round trip preserves predictions") {
  Vocabulary v = toy_vocab(3);
  ClassifierConfig cfg = small_config();
  RandomSource rng(51);
  IntentClassifier clf(cfg, v, {"a", "b", "c"}, rng);
  TokenSequence x = encode(class_sentence(2, rng, 4), v, cfg.max_len);
  Matrix before = predict_batch(clf, {x});

  std::string path = "/tmp/pog_clf_ckpt.json";
  save_classifier(clf, path);
  IntentClassifier loaded = load_classifier(path);
  Matrix after = predict_batch(loaded, {x});
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

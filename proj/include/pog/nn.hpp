// nn.hpp
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

#include <map>
#include <string>
#include <vector>

#include "pog/autodiff.hpp"
#include "pog/rng.hpp"
#include "pog/types.hpp"

namespace pog::nn {

// A trainable matrix plus its Adam state.
struct Param {
  std::string name;
  Matrix value;
  Matrix m;
  Matrix v;
  std::int64_t adam_t = 0;

  Param() = default;
  Param(std::string n, Matrix val)
      : name(std::move(n)),
        value(std::move(val)),
        m(Matrix::Zero(value.rows(), value.cols())),
        v(Matrix::Zero(value.rows(), value.cols())) {}
};

using ParamRefs = std::vector<Param*>;

Matrix glorot_uniform(RandomSource& rng, Eigen::Index rows, Eigen::Index cols);

struct AdamConfig {
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
};

// One Adam update per (param, gradient) pair. Bias correction uses the
// per-param update counter so parameter sets stepped at different cadences
// stay correct.
void adam_step(const AdamConfig& cfg, const ParamRefs& params,
               const std::vector<Matrix>& grads);

// Per-tape cache of parameter leaves so each Param appears once per tape even
// when several forward passes share it.
class LeafMap {
 public:
  explicit LeafMap(ad::Tape& tape) : tape_(&tape) {}
  ad::Var operator()(Param& p);
  // Leaves in first-use order paired with their params; used to fetch grads.
  const ParamRefs& params() const { return params_; }
  const std::vector<ad::Var>& leaves() const { return leaves_; }

 private:
  ad::Tape* tape_;
  std::map<const Param*, ad::Var> cache_;
  ParamRefs params_;
  std::vector<ad::Var> leaves_;
};

// Computes grads of `loss` for every leaf in `lm` and applies one Adam step
// to the subset listed in `subset` (others are left frozen).
void step_params(const AdamConfig& cfg, ad::Tape& tape, LeafMap& lm,
                 ad::Var loss, const ParamRefs& subset);

// ---- recurrent cell ------------------------------------------------------

struct LstmParams {
  Param w_x;  // input_dim x 4h
  Param w_h;  // h x 4h
  Param b;    // 1 x 4h

  LstmParams() = default;
  LstmParams(const std::string& prefix, Eigen::Index input_dim, Eigen::Index h,
             RandomSource& rng);
  Eigen::Index hidden() const { return w_h.value.rows(); }
  ParamRefs params();
};

struct LstmState {
  ad::Var h;
  ad::Var c;
};

// Gate order i, f, g, o.
LstmState lstm_step(ad::Tape& tape, LeafMap& lm, LstmParams& p, ad::Var x,
                    const LstmState& prev);

// ---- feed-forward stacks -------------------------------------------------

struct Dense {
  Param w;
  Param b;
  Dense() = default;
  Dense(const std::string& prefix, Eigen::Index in, Eigen::Index out,
        RandomSource& rng);
};

ad::Var dense_forward(LeafMap& lm, Dense& layer, ad::Var x);

// Fully connected stack with leaky rectifier between layers, linear output.
struct Mlp {
  std::vector<Dense> layers;
  Scalar slope = 0.2;

  Mlp() = default;
  Mlp(const std::string& prefix, const std::vector<Eigen::Index>& dims,
      Scalar leaky_slope, RandomSource& rng);
  ParamRefs params();
  Eigen::Index input_dim() const { return layers.front().w.value.rows(); }
  Eigen::Index output_dim() const { return layers.back().w.value.cols(); }
};

ad::Var mlp_forward(ad::Tape& tape, LeafMap& lm, Mlp& mlp, ad::Var x);

// ---- convolutional text encoder -------------------------------------------

// Kim-style text CNN: embedding, parallel window convolutions with max-over-
// time pooling, rectified fully connected head, linear output layer.
struct TextCnnConfig {
  Eigen::Index vocab_size = 0;
  Eigen::Index embed_dim = 100;
  std::vector<Eigen::Index> kernel_widths = {2, 3, 4, 5};
  Eigen::Index feature_maps = 128;
  Eigen::Index hidden = 512;
  int hidden_layers = 3;
  Eigen::Index num_classes = 0;
  Scalar dropout = 0.5;
};

struct TextCnn {
  TextCnnConfig cfg;
  Param embed;  // V x d
  struct ConvFilter {
    Eigen::Index width = 0;
    Param w;  // (width * d) x feature_maps
    Param b;  // 1 x feature_maps
  };
  std::vector<ConvFilter> convs;
  std::vector<Dense> fcs;
  Dense out;

  TextCnn() = default;
  TextCnn(const TextCnnConfig& config, RandomSource& rng);
  ParamRefs params();
};

// Forward to logits from an embedded batch laid out as (B*T) x d with example
// b in rows [b*T, (b+1)*T). `features_out`, when non-null, receives the
// penultimate activations (before dropout). `dropout_rng` non-null enables
// inverted dropout on the penultimate layer.
ad::Var textcnn_logits_from_embedded(ad::Tape& tape, LeafMap& lm, TextCnn& net,
                                     ad::Var embedded, Eigen::Index t_len,
                                     RandomSource* dropout_rng,
                                     ad::Var* features_out = nullptr);

// Hard-token entry: ids are (B*T) flattened.
ad::Var textcnn_logits(ad::Tape& tape, LeafMap& lm, TextCnn& net,
                       const std::vector<int>& flat_ids, Eigen::Index t_len,
                       RandomSource* dropout_rng,
                       ad::Var* features_out = nullptr);

// ---- shared loss pieces ----------------------------------------------------

// Mean over rows of -log softmax(logits)[label].
ad::Var nll_loss(ad::Tape& tape, ad::Var logits, const std::vector<int>& labels);

// Mean over rows of -H(softmax(logits)); in [-ln m, 0]. Single implementation
// shared by every entropy-based objective.
ad::Var mean_negative_entropy(ad::Tape& tape, ad::Var logits);

}  // namespace pog::nn

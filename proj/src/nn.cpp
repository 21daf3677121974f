// nn.cpp
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

#include "pog/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace pog::nn {

using ad::Var;

Matrix glorot_uniform(RandomSource& rng, Eigen::Index rows, Eigen::Index cols) {
  Scalar s = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  return rng.uniform_matrix(rows, cols, -s, s);
}

void adam_step(const AdamConfig& cfg, const ParamRefs& params,
               const std::vector<Matrix>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: param/grad count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    const Matrix& g = grads[i];
    p.adam_t += 1;
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * g;
    p.v = (cfg.beta2 * p.v.array() + (1.0 - cfg.beta2) * g.array().square())
              .matrix();
    Scalar bc1 = 1.0 - std::pow(cfg.beta1, static_cast<Scalar>(p.adam_t));
    Scalar bc2 = 1.0 - std::pow(cfg.beta2, static_cast<Scalar>(p.adam_t));
    Matrix mhat = p.m / bc1;
    Matrix vhat = p.v / bc2;
    p.value.array() -=
        cfg.lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
  }
}

Var LeafMap::operator()(Param& p) {
  auto it = cache_.find(&p);
  if (it != cache_.end()) return it->second;
  Var leaf = tape_->leaf(p.value);
  cache_.emplace(&p, leaf);
  params_.push_back(&p);
  leaves_.push_back(leaf);
  return leaf;
}

void step_params(const AdamConfig& cfg, ad::Tape& tape, LeafMap& lm,
                 ad::Var loss, const ParamRefs& subset) {
  std::vector<ad::Var> grads = tape.gradients(loss, lm.leaves());
  ParamRefs step_list;
  std::vector<Matrix> step_grads;
  for (Param* want : subset) {
    const ParamRefs& all = lm.params();
    for (size_t i = 0; i < all.size(); ++i) {
      if (all[i] == want) {
        step_list.push_back(want);
        step_grads.push_back(grads[i].value());
        break;
      }
    }
  }
  adam_step(cfg, step_list, step_grads);
}

LstmParams::LstmParams(const std::string& prefix, Eigen::Index input_dim,
                       Eigen::Index h, RandomSource& rng) {
  w_x = Param(prefix + ".w_x", glorot_uniform(rng, input_dim, 4 * h));
  w_h = Param(prefix + ".w_h", glorot_uniform(rng, h, 4 * h));
  Matrix bias = Matrix::Zero(1, 4 * h);
  bias.middleCols(h, h).setOnes();  // forget gate starts open
  b = Param(prefix + ".b", std::move(bias));
}

ParamRefs LstmParams::params() { return {&w_x, &w_h, &b}; }

LstmState lstm_step(ad::Tape& tape, LeafMap& lm, LstmParams& p, Var x,
                    const LstmState& prev) {
  Eigen::Index h = p.hidden();
  Var gates = ad::add_rowvec(
      ad::add(ad::matmul(x, lm(p.w_x)), ad::matmul(prev.h, lm(p.w_h))),
      lm(p.b));
  Var i = ad::sigmoid(ad::slice_cols(gates, 0, h));
  Var f = ad::sigmoid(ad::slice_cols(gates, h, h));
  Var g = ad::tanh(ad::slice_cols(gates, 2 * h, h));
  Var o = ad::sigmoid(ad::slice_cols(gates, 3 * h, h));
  Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, g));
  Var hh = ad::mul(o, ad::tanh(c));
  (void)tape;
  return {hh, c};
}

Dense::Dense(const std::string& prefix, Eigen::Index in, Eigen::Index out,
             RandomSource& rng) {
  w = Param(prefix + ".w", glorot_uniform(rng, in, out));
  b = Param(prefix + ".b", Matrix::Zero(1, out));
}

Var dense_forward(LeafMap& lm, Dense& layer, Var x) {
  return ad::add_rowvec(ad::matmul(x, lm(layer.w)), lm(layer.b));
}

Mlp::Mlp(const std::string& prefix, const std::vector<Eigen::Index>& dims,
         Scalar leaky_slope, RandomSource& rng)
    : slope(leaky_slope) {
  for (size_t i = 0; i + 1 < dims.size(); ++i)
    layers.emplace_back(prefix + ".l" + std::to_string(i), dims[i],
                        dims[i + 1], rng);
}

ParamRefs Mlp::params() {
  ParamRefs out;
  for (Dense& d : layers) {
    out.push_back(&d.w);
    out.push_back(&d.b);
  }
  return out;
}

Var mlp_forward(ad::Tape& tape, LeafMap& lm, Mlp& mlp, Var x) {
  (void)tape;
  Var h = x;
  for (size_t i = 0; i < mlp.layers.size(); ++i) {
    h = dense_forward(lm, mlp.layers[i], h);
    if (i + 1 < mlp.layers.size()) h = ad::leaky_relu(h, mlp.slope);
  }
  return h;
}

TextCnn::TextCnn(const TextCnnConfig& config, RandomSource& rng) : cfg(config) {
  embed = Param("embed", rng.uniform_matrix(cfg.vocab_size, cfg.embed_dim,
                                            -0.1, 0.1));
  for (Eigen::Index k : cfg.kernel_widths) {
    ConvFilter f;
    f.width = k;
    f.w = Param("conv" + std::to_string(k) + ".w",
                glorot_uniform(rng, k * cfg.embed_dim, cfg.feature_maps));
    f.b = Param("conv" + std::to_string(k) + ".b",
                Matrix::Zero(1, cfg.feature_maps));
    convs.push_back(std::move(f));
  }
  Eigen::Index feat = static_cast<Eigen::Index>(cfg.kernel_widths.size()) *
                      cfg.feature_maps;
  Eigen::Index in = feat;
  for (int i = 0; i < cfg.hidden_layers; ++i) {
    fcs.emplace_back("fc" + std::to_string(i), in, cfg.hidden, rng);
    in = cfg.hidden;
  }
  out = Dense("out", in, cfg.num_classes, rng);
}

ParamRefs TextCnn::params() {
  ParamRefs r{&embed};
  for (auto& c : convs) {
    r.push_back(&c.w);
    r.push_back(&c.b);
  }
  for (auto& d : fcs) {
    r.push_back(&d.w);
    r.push_back(&d.b);
  }
  r.push_back(&out.w);
  r.push_back(&out.b);
  return r;
}

Var textcnn_logits_from_embedded(ad::Tape& tape, LeafMap& lm, TextCnn& net,
                                 Var embedded, Eigen::Index t_len,
                                 RandomSource* dropout_rng, Var* features_out) {
  std::vector<Var> pooled;
  for (auto& conv : net.convs) {
    if (conv.width > t_len)
      throw std::invalid_argument("textcnn: sequence shorter than kernel");
    Var windows = ad::im2row(embedded, t_len, conv.width);
    Var act = ad::relu(ad::add_rowvec(ad::matmul(windows, lm(conv.w)),
                                      lm(conv.b)));
    pooled.push_back(ad::maxpool_groups(act, t_len - conv.width + 1));
  }
  Var h = ad::hcat(tape, pooled);
  for (auto& fc : net.fcs) h = ad::relu(dense_forward(lm, fc, h));
  if (features_out) *features_out = h;
  if (dropout_rng && net.cfg.dropout > 0.0) {
    Scalar keep = 1.0 - net.cfg.dropout;
    Matrix mask(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
    h = ad::mul(h, ad::constant(tape, std::move(mask)));
  }
  return dense_forward(lm, net.out, h);
}

Var textcnn_logits(ad::Tape& tape, LeafMap& lm, TextCnn& net,
                   const std::vector<int>& flat_ids, Eigen::Index t_len,
                   RandomSource* dropout_rng, Var* features_out) {
  Var embedded = ad::gather_rows(lm(net.embed), flat_ids);
  return textcnn_logits_from_embedded(tape, lm, net, embedded, t_len,
                                      dropout_rng, features_out);
}

Var nll_loss(ad::Tape& tape, Var logits, const std::vector<int>& labels) {
  (void)tape;
  Var lsm = ad::log_softmax_rows(logits);
  Var picked = ad::pick_per_row(lsm, labels);
  return ad::neg(ad::mean(picked));
}

Var mean_negative_entropy(ad::Tape& tape, Var logits) {
  (void)tape;
  Var lsm = ad::log_softmax_rows(logits);
  Var probs = ad::exp(lsm);
  // -H per row = sum p*log p; mean of rowwise sums over the batch.
  Var per_row = ad::rowwise_sum(ad::mul(probs, lsm));
  return ad::mean(per_row);
}

}  // namespace pog::nn

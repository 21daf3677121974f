// autodiff.cpp
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

#include "pog/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace pog::ad {

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make(Matrix value, std::vector<int> parents, Vjp vjp) {
  nodes_.push_back(Node{std::move(value), std::move(parents), std::move(vjp)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

std::vector<Var> Tape::gradients(const Var& scalar, std::span<const Var> wrt) {
  if (scalar.tape != this || scalar.value().size() != 1)
    throw std::invalid_argument("gradients: expected a 1x1 node on this tape");

  std::unordered_map<int, Var> adjoint;
  adjoint[scalar.id] = leaf(Matrix::Ones(1, 1));

  // Creation order is a topological order, so a single reverse sweep from the
  // loss suffices. Vjp calls append nodes above `scalar.id`; they belong to
  // the gradient expression and are only visited by a later gradients() call.
  for (int id = scalar.id; id >= 0; --id) {
    auto it = adjoint.find(id);
    if (it == adjoint.end()) continue;
    Node& node = nodes_[static_cast<size_t>(id)];
    if (!node.vjp) continue;
    Var self{this, id};
    std::vector<Var> contrib = node.vjp(*this, self, it->second);
    for (size_t p = 0; p < node.parents.size(); ++p) {
      if (!contrib[p].valid()) continue;
      int pid = node.parents[p];
      auto pit = adjoint.find(pid);
      if (pit == adjoint.end())
        adjoint[pid] = contrib[p];
      else
        pit->second = add(pit->second, contrib[p]);
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    auto it = adjoint.find(w.id);
    if (it != adjoint.end())
      out.push_back(it->second);
    else
      out.push_back(leaf(Matrix::Zero(w.rows(), w.cols())));
  }
  return out;
}

namespace {

Tape& tape_of(const Var& a) { return *a.tape; }

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var constant(Tape& t, Matrix value) { return t.leaf(std::move(value)); }

Var add(Var a, Var b) {
  check_same_shape(a, b, "add");
  return tape_of(a).make(
      a.value() + b.value(), {a.id, b.id},
      [](Tape&, const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(Var a, Var b) {
  check_same_shape(a, b, "sub");
  return tape_of(a).make(a.value() - b.value(), {a.id, b.id},
                         [](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{g, neg(g)};
                         });
}

Var mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  return tape_of(a).make(
      a.value().cwiseProduct(b.value()), {a.id, b.id},
      [a, b](Tape&, const Var&, const Var& g) {
        return std::vector<Var>{mul(g, b), mul(g, a)};
      });
}

Var divide(Var a, Var b) {
  check_same_shape(a, b, "divide");
  return tape_of(a).make(a.value().cwiseQuotient(b.value()), {a.id, b.id},
                         [a, b](Tape&, const Var& self, const Var& g) {
                           Var da = divide(g, b);
                           Var db = neg(mul(g, divide(self, b)));
                           return std::vector<Var>{da, db};
                         });
}

Var axpb(Var a, Scalar alpha, Scalar beta) {
  return tape_of(a).make(
      (alpha * a.value().array() + beta).matrix(), {a.id},
      [alpha](Tape&, const Var&, const Var& g) {
        return std::vector<Var>{axpb(g, alpha, 0.0)};
      });
}

Var neg(Var a) { return axpb(a, -1.0, 0.0); }

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dims");
  return tape_of(a).make(
      a.value() * b.value(), {a.id, b.id},
      [a, b](Tape&, const Var&, const Var& g) {
        return std::vector<Var>{matmul(g, transpose(b)),
                                matmul(transpose(a), g)};
      });
}

Var transpose(Var a) {
  return tape_of(a).make(a.value().transpose(), {a.id},
                         [](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{transpose(g)};
                         });
}

Var exp(Var a) {
  return tape_of(a).make(a.value().array().exp().matrix(), {a.id},
                         [](Tape&, const Var& self, const Var& g) {
                           return std::vector<Var>{mul(g, self)};
                         });
}

Var log(Var a) {
  return tape_of(a).make(a.value().array().log().matrix(), {a.id},
                         [a](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{divide(g, a)};
                         });
}

Var sqrt(Var a) {
  return tape_of(a).make(a.value().array().sqrt().matrix(), {a.id},
                         [](Tape&, const Var& self, const Var& g) {
                           return std::vector<Var>{divide(g, axpb(self, 2.0, 0.0))};
                         });
}

Var tanh(Var a) {
  return tape_of(a).make(a.value().array().tanh().matrix(), {a.id},
                         [](Tape&, const Var& self, const Var& g) {
                           Var one_minus_sq = axpb(mul(self, self), -1.0, 1.0);
                           return std::vector<Var>{mul(g, one_minus_sq)};
                         });
}

Var sigmoid(Var a) {
  Matrix v = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return tape_of(a).make(std::move(v), {a.id},
                         [](Tape&, const Var& self, const Var& g) {
                           Var s1 = axpb(self, -1.0, 1.0);
                           return std::vector<Var>{mul(g, mul(self, s1))};
                         });
}

Var leaky_relu(Var a, Scalar slope) {
  Matrix mask = (a.value().array() > 0.0).select(
      Matrix::Ones(a.rows(), a.cols()),
      Matrix::Constant(a.rows(), a.cols(), slope));
  Matrix v = a.value().cwiseProduct(mask);
  // The mask is a.e. constant in a; treat it as such in the vjp.
  return tape_of(a).make(std::move(v), {a.id},
                         [mask](Tape& t, const Var&, const Var& g) {
                           Var m = t.leaf(mask);
                           return std::vector<Var>{mul(g, m)};
                         });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var sum(Var a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  Eigen::Index r = a.rows(), c = a.cols();
  return tape_of(a).make(std::move(v), {a.id},
                         [r, c](Tape&, const Var&, const Var& g) {
                           Var row = broadcast_cols(g, c);  // 1 x c
                           return std::vector<Var>{broadcast_rows(row, r)};
                         });
}

Var mean(Var a) {
  Scalar n = static_cast<Scalar>(a.value().size());
  return axpb(sum(a), 1.0 / n, 0.0);
}

Var rowwise_sum(Var a) {
  Eigen::Index c = a.cols();
  return tape_of(a).make(a.value().rowwise().sum(), {a.id},
                         [c](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{broadcast_cols(g, c)};
                         });
}

Var colwise_sum(Var a) {
  Eigen::Index r = a.rows();
  return tape_of(a).make(a.value().colwise().sum(), {a.id},
                         [r](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{broadcast_rows(g, r)};
                         });
}

Var broadcast_rows(Var row, Eigen::Index rows) {
  if (row.rows() != 1) throw std::invalid_argument("broadcast_rows: not a row");
  return tape_of(row).make(row.value().replicate(rows, 1), {row.id},
                           [](Tape&, const Var&, const Var& g) {
                             return std::vector<Var>{colwise_sum(g)};
                           });
}

Var broadcast_cols(Var col, Eigen::Index cols) {
  if (col.cols() != 1) throw std::invalid_argument("broadcast_cols: not a col");
  return tape_of(col).make(col.value().replicate(1, cols), {col.id},
                           [](Tape&, const Var&, const Var& g) {
                             return std::vector<Var>{rowwise_sum(g)};
                           });
}

Var add_rowvec(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw std::invalid_argument("add_rowvec: shape mismatch");
  return tape_of(a).make(a.value().rowwise() + row.value().row(0), {a.id, row.id},
                         [](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{g, colwise_sum(g)};
                         });
}

Var softmax_rows(Var a) {
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::Array<Scalar, 1, Eigen::Dynamic> r = v.row(i).array();
    r -= r.maxCoeff();
    r = r.exp();
    v.row(i) = (r / r.sum()).matrix();
  }
  Eigen::Index c = a.cols();
  return tape_of(a).make(std::move(v), {a.id},
                         [c](Tape&, const Var& self, const Var& g) {
                           Var dot = rowwise_sum(mul(g, self));
                           Var gz = mul(self, sub(g, broadcast_cols(dot, c)));
                           return std::vector<Var>{gz};
                         });
}

Var log_softmax_rows(Var a) {
  Matrix v = a.value();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::Array<Scalar, 1, Eigen::Dynamic> r = v.row(i).array();
    Scalar mx = r.maxCoeff();
    Scalar lse = mx + std::log((r - mx).exp().sum());
    v.row(i) = (r - lse).matrix();
  }
  Eigen::Index c = a.cols();
  return tape_of(a).make(std::move(v), {a.id},
                         [c](Tape&, const Var& self, const Var& g) {
                           Var probs = exp(self);
                           Var rs = broadcast_cols(rowwise_sum(g), c);
                           return std::vector<Var>{sub(g, mul(probs, rs))};
                         });
}

Var pick_per_row(Var a, std::vector<int> idx) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows())
    throw std::invalid_argument("pick_per_row: index count");
  Matrix v(a.rows(), 1);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    v(i, 0) = a.value()(i, idx[static_cast<size_t>(i)]);
  Eigen::Index c = a.cols();
  return tape_of(a).make(std::move(v), {a.id},
                         [idx, c](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{scatter_per_row(g, idx, c)};
                         });
}

Var scatter_per_row(Var col, std::vector<int> idx, Eigen::Index cols) {
  if (col.cols() != 1 || static_cast<Eigen::Index>(idx.size()) != col.rows())
    throw std::invalid_argument("scatter_per_row: shape");
  Matrix v = Matrix::Zero(col.rows(), cols);
  for (Eigen::Index i = 0; i < col.rows(); ++i)
    v(i, idx[static_cast<size_t>(i)]) = col.value()(i, 0);
  return tape_of(col).make(std::move(v), {col.id},
                           [idx](Tape&, const Var&, const Var& g) {
                             return std::vector<Var>{pick_per_row(g, idx)};
                           });
}

Var gather_rows(Var a, std::vector<int> ids) {
  Matrix v(static_cast<Eigen::Index>(ids.size()), a.cols());
  for (size_t i = 0; i < ids.size(); ++i)
    v.row(static_cast<Eigen::Index>(i)) = a.value().row(ids[i]);
  Eigen::Index rows = a.rows();
  return tape_of(a).make(std::move(v), {a.id},
                         [ids, rows](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{scatter_add_rows(g, ids, rows)};
                         });
}

Var scatter_add_rows(Var a, std::vector<int> ids, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(ids.size()) != a.rows())
    throw std::invalid_argument("scatter_add_rows: index count");
  Matrix v = Matrix::Zero(rows, a.cols());
  for (size_t i = 0; i < ids.size(); ++i)
    v.row(ids[i]) += a.value().row(static_cast<Eigen::Index>(i));
  return tape_of(a).make(std::move(v), {a.id},
                         [ids](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{gather_rows(g, ids)};
                         });
}

Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n) {
  Eigen::Index total = a.cols();
  return tape_of(a).make(a.value().middleCols(c0, n), {a.id},
                         [c0, total](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{pad_cols(g, c0, total)};
                         });
}

Var pad_cols(Var a, Eigen::Index c0, Eigen::Index total) {
  Matrix v = Matrix::Zero(a.rows(), total);
  v.middleCols(c0, a.cols()) = a.value();
  Eigen::Index n = a.cols();
  return tape_of(a).make(std::move(v), {a.id},
                         [c0, n](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{slice_cols(g, c0, n)};
                         });
}

Var hcat(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: empty");
  Eigen::Index rows = parts[0].rows();
  Eigen::Index total = 0;
  for (const Var& p : parts) total += p.cols();
  Matrix v(rows, total);
  std::vector<int> parents;
  std::vector<Eigen::Index> offsets, widths;
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    parents.push_back(p.id);
    offsets.push_back(off);
    widths.push_back(p.cols());
    off += p.cols();
  }
  return t.make(std::move(v), std::move(parents),
                [offsets, widths](Tape&, const Var&, const Var& g) {
                  std::vector<Var> out;
                  for (size_t i = 0; i < offsets.size(); ++i)
                    out.push_back(slice_cols(g, offsets[i], widths[i]));
                  return out;
                });
}

Var im2row(Var a, Eigen::Index t_len, Eigen::Index k) {
  Eigen::Index d = a.cols();
  if (a.rows() % t_len != 0) throw std::invalid_argument("im2row: rows % T");
  Eigen::Index batch = a.rows() / t_len;
  Eigen::Index p_len = t_len - k + 1;
  if (p_len < 1) throw std::invalid_argument("im2row: window longer than sequence");
  Matrix v(batch * p_len, k * d);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index p = 0; p < p_len; ++p)
      for (Eigen::Index j = 0; j < k; ++j)
        v.row(b * p_len + p).segment(j * d, d) = a.value().row(b * t_len + p + j);
  return tape_of(a).make(std::move(v), {a.id},
                         [t_len, k, d](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{row2im(g, t_len, k, d)};
                         });
}

Var row2im(Var a, Eigen::Index t_len, Eigen::Index k, Eigen::Index d) {
  Eigen::Index p_len = t_len - k + 1;
  if (a.rows() % p_len != 0 || a.cols() != k * d)
    throw std::invalid_argument("row2im: shape");
  Eigen::Index batch = a.rows() / p_len;
  Matrix v = Matrix::Zero(batch * t_len, d);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index p = 0; p < p_len; ++p)
      for (Eigen::Index j = 0; j < k; ++j)
        v.row(b * t_len + p + j) += a.value().row(b * p_len + p).segment(j * d, d);
  return tape_of(a).make(std::move(v), {a.id},
                         [t_len, k](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{im2row(g, t_len, k)};
                         });
}

namespace {

// Per-element routing pair used by maxpool_groups. `arg[b*f + j]` is the
// source row for output element (b, j); both directions are linear and each
// is the other's transpose.
Var unpool_argmax(Var g, std::vector<int> arg, Eigen::Index rows);

Var pool_argmax(Var a, std::vector<int> arg, Eigen::Index batch) {
  Eigen::Index f = a.cols();
  Matrix v(batch, f);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index j = 0; j < f; ++j)
      v(b, j) = a.value()(arg[static_cast<size_t>(b * f + j)], j);
  Eigen::Index rows = a.rows();
  return tape_of(a).make(std::move(v), {a.id},
                         [arg, rows](Tape&, const Var&, const Var& g) {
                           return std::vector<Var>{unpool_argmax(g, arg, rows)};
                         });
}

Var unpool_argmax(Var g, std::vector<int> arg, Eigen::Index rows) {
  Eigen::Index f = g.cols();
  Matrix v = Matrix::Zero(rows, f);
  for (Eigen::Index b = 0; b < g.rows(); ++b)
    for (Eigen::Index j = 0; j < f; ++j)
      v(arg[static_cast<size_t>(b * f + j)], j) += g.value()(b, j);
  Eigen::Index batch = g.rows();
  return tape_of(g).make(std::move(v), {g.id},
                         [arg, batch](Tape&, const Var&, const Var& gg) {
                           return std::vector<Var>{pool_argmax(gg, arg, batch)};
                         });
}

}  // namespace

Var maxpool_groups(Var a, Eigen::Index group) {
  if (a.rows() % group != 0) throw std::invalid_argument("maxpool_groups: rows");
  Eigen::Index batch = a.rows() / group;
  Eigen::Index f = a.cols();
  // argmax row per (example, feature); the routing is a.e. constant in a.
  std::vector<int> arg(static_cast<size_t>(batch * f));
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index j = 0; j < f; ++j) {
      Eigen::Index best = 0;
      Scalar bv = a.value()(b * group, j);
      for (Eigen::Index p = 1; p < group; ++p) {
        Scalar cv = a.value()(b * group + p, j);
        if (cv > bv) {
          bv = cv;
          best = p;
        }
      }
      arg[static_cast<size_t>(b * f + j)] = static_cast<int>(b * group + best);
    }
  }
  return pool_argmax(a, std::move(arg), batch);
}

Var stack_timesteps(Tape& t, std::span<const Var> steps) {
  if (steps.empty()) throw std::invalid_argument("stack_timesteps: empty");
  Eigen::Index batch = steps[0].rows();
  Eigen::Index n = steps[0].cols();
  Eigen::Index t_len = static_cast<Eigen::Index>(steps.size());
  Matrix v(batch * t_len, n);
  std::vector<int> parents;
  for (Eigen::Index s = 0; s < t_len; ++s) {
    parents.push_back(steps[static_cast<size_t>(s)].id);
    for (Eigen::Index b = 0; b < batch; ++b)
      v.row(b * t_len + s) = steps[static_cast<size_t>(s)].value().row(b);
  }
  return t.make(std::move(v), std::move(parents),
                [batch, t_len](Tape&, const Var&, const Var& g) {
                  std::vector<Var> out;
                  for (Eigen::Index s = 0; s < t_len; ++s) {
                    std::vector<int> ids(static_cast<size_t>(batch));
                    for (Eigen::Index b = 0; b < batch; ++b)
                      ids[static_cast<size_t>(b)] = static_cast<int>(b * t_len + s);
                    out.push_back(gather_rows(g, ids));
                  }
                  return out;
                });
}

}  // namespace pog::ad

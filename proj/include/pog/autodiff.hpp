// autodiff.hpp
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

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "pog/types.hpp"

namespace pog::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; invalid when id < 0.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const { return value()(0, 0); }
};

// Reverse-mode tape. Backward functions emit new tape nodes, so gradients
// are themselves differentiable (needed for the discriminator gradient
// penalty, which differentiates an input gradient with respect to weights).
class Tape {
 public:
  using Vjp =
      std::function<std::vector<Var>(Tape&, const Var& self, const Var& gout)>;

  Var leaf(Matrix value);
  Var make(Matrix value, std::vector<int> parents, Vjp vjp);

  const Matrix& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  size_t size() const { return nodes_.size(); }

  // d(scalar)/d(wrt_i) for a 1x1 scalar node. Unreached parameters come back
  // as zero matrices of the parameter's shape.
  std::vector<Var> gradients(const Var& scalar, std::span<const Var> wrt);

 private:
  struct Node {
    Matrix value;
    std::vector<int> parents;
    Vjp vjp;
  };
  std::deque<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape->value(id); }

// ---- primitive ops -------------------------------------------------------
// Free functions; every op records its inputs so expressions compose.

Var constant(Tape& t, Matrix value);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var divide(Var a, Var b);
// alpha * a + beta, elementwise
Var axpb(Var a, Scalar alpha, Scalar beta);
Var neg(Var a);
Var matmul(Var a, Var b);
Var transpose(Var a);

Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var leaky_relu(Var a, Scalar slope);
Var relu(Var a);

Var sum(Var a);           // 1x1
Var mean(Var a);          // 1x1
Var rowwise_sum(Var a);   // m x 1
Var colwise_sum(Var a);   // 1 x n
Var broadcast_rows(Var row, Eigen::Index rows);  // 1xn -> rows x n
Var broadcast_cols(Var col, Eigen::Index cols);  // mx1 -> m x cols
Var add_rowvec(Var a, Var row);                  // bias add over rows

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// out(i, 0) = a(i, idx[i])
Var pick_per_row(Var a, std::vector<int> idx);
// inverse of pick_per_row: m x 1 column scattered into an m x cols zero matrix
Var scatter_per_row(Var col, std::vector<int> idx, Eigen::Index cols);
// out.row(i) = a.row(ids[i])
Var gather_rows(Var a, std::vector<int> ids);
// rows x cols zero matrix with a.row(i) accumulated into row ids[i]
Var scatter_add_rows(Var a, std::vector<int> ids, Eigen::Index rows);

Var slice_cols(Var a, Eigen::Index c0, Eigen::Index n);
Var pad_cols(Var a, Eigen::Index c0, Eigen::Index total);
Var hcat(Tape& t, std::span<const Var> parts);

// Text-convolution helpers. Rows of `a` are grouped per example: example b
// occupies rows [b*T, (b+1)*T). im2row emits one row per window position with
// the k participating rows concatenated.
Var im2row(Var a, Eigen::Index t_len, Eigen::Index k);
Var row2im(Var a, Eigen::Index t_len, Eigen::Index k, Eigen::Index d);
// a is (B*P) x F grouped per example; max over each group of P rows.
Var maxpool_groups(Var a, Eigen::Index group);

// Steps t = 0..T-1, each B x n, interleaved into (B*T) x n with row b*T + t.
Var stack_timesteps(Tape& t, std::span<const Var> steps);

}  // namespace pog::ad

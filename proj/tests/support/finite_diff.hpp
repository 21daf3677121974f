// finite_diff.hpp
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

#include <functional>
#include <string>
#include <vector>

#include "pog/nn.hpp"
#include "pog/types.hpp"

namespace pog::test {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param(i,j)" of the worst entry
  bool ok(double tol) const { return max_rel_err <= tol; }
};

// Central-difference check of d loss / d params. `loss_fn` must recompute the
// scalar loss from the params' current values (including any fixed random
// draws, which the caller freezes beforehand). `analytic` holds one gradient
// matrix per param, in order.
GradCheckResult check_gradients(const std::function<double()>& loss_fn,
                                const std::vector<nn::Param*>& params,
                                const std::vector<Matrix>& analytic,
                                double h = 1e-5);

// Convenience: runs a tape-building function once to obtain analytic
// gradients for every param, then compares against central differences.
GradCheckResult check_loss_gradients(
    const std::function<double(bool want_grads, std::vector<Matrix>* grads)>&
        run,
    const std::vector<nn::Param*>& params, double h = 1e-5);

}  // namespace pog::test

// Copyright 2026 The ftnet Authors.
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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ftnet/tensor.hpp"

namespace ftnet {

/// First/second moment estimates, one slot per parameter in the order the
/// parameters are passed to adam_step.
template <typename Scalar>
struct AdamState {
  using Array = typename BasicTensor<Scalar>::Array;

  std::vector<Array> m;
  std::vector<Array> v;
  std::int64_t t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

/// One bias-corrected Adam update over `params`, reading each parameter's
/// accumulated grad (a parameter without grad counts as a zero gradient).
///
///     m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///     theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
template <typename Scalar>
void adam_step(std::span<BasicTensor<Scalar>> params, AdamState<Scalar>& s, Scalar lr) {
  using Array = typename BasicTensor<Scalar>::Array;
  if (!(lr > 0)) throw UsageError("adam_step: learning rate must be positive");
  if (s.m.empty()) {
    for (const auto& p : params) {
      s.m.push_back(Array::Zero(static_cast<Eigen::Index>(p.size())));
      s.v.push_back(Array::Zero(static_cast<Eigen::Index>(p.size())));
    }
  }
  if (s.m.size() != params.size()) {
    throw UsageError("adam_step: parameter count changed between steps");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].has_grad() && !params[i].grad().allFinite()) {
      const auto& name = params[i].name();
      throw NumericError("adam_step: non-finite gradient for parameter " +
                         (name.empty() ? "#" + std::to_string(i) : name));
    }
  }
  ++s.t;
  const Scalar c1 = Scalar(1) - std::pow(s.beta1, static_cast<Scalar>(s.t));
  const Scalar c2 = Scalar(1) - std::pow(s.beta2, static_cast<Scalar>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.has_grad()) {
      const Array& g = p.grad();
      s.m[i] = s.beta1 * s.m[i] + (Scalar(1) - s.beta1) * g;
      s.v[i] = s.beta2 * s.v[i] + (Scalar(1) - s.beta2) * g.square();
    } else {
      s.m[i] *= s.beta1;
      s.v[i] *= s.beta2;
    }
    p.mutable_values() -= lr * (s.m[i] / c1) / ((s.v[i] / c2).sqrt() + s.eps);
  }
}

}  // namespace ftnet

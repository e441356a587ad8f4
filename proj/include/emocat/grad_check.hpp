// Copyright 2026 The emocat authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EMOCAT_GRAD_CHECK_HPP_
#define EMOCAT_GRAD_CHECK_HPP_

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "emocat/autodiff.hpp"
#include "emocat/layers.hpp"
#include "emocat/tensor.hpp"

namespace emocat {

/// Builds a scalar-loss graph from leaf variables. Must be a pure
/// deterministic function of the leaves.
using GraphBuilder = std::function<Var(const std::vector<Var>&)>;

/// Central-difference gradient check. Returns the max over all input entries
/// of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8). Any attached
/// gradient transform is forced to identity, since transforms deliberately
/// falsify gradients.
inline double grad_check(const GraphBuilder& build, std::vector<Tensor> inputs,
                         double h = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& ins) {
    std::vector<Var> leaves;
    leaves.reserve(ins.size());
    for (const Tensor& t : ins) leaves.push_back(Var::leaf(t));
    Var loss = build(leaves);
    if (loss.value().numel() != 1)
      throw std::invalid_argument("grad_check: builder must return a scalar loss, got shape " +
                                  loss.value().shape_str());
    return std::pair<double, std::vector<Var>>(loss.value().data[0], std::move(leaves));
  };

  auto [v0, leaves] = eval(inputs);
  auto [v1, leaves_again] = eval(inputs);
  if (v0 != v1)
    throw std::runtime_error("grad_check: non-deterministic builder (values differ across calls)");

  // analytic gradients via one backward pass on the first graph
  {
    std::vector<Var> ls;
    for (const Tensor& t : inputs) ls.push_back(Var::leaf(t));
    Var loss = build(ls);
    backward(loss, /*apply_transforms=*/false);
    leaves = std::move(ls);
  }

  double max_rel = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].data.size(); ++j) {
      double orig = inputs[i].data[j];
      inputs[i].data[j] = orig + h;
      double fp = eval(inputs).first;
      inputs[i].data[j] = orig - h;
      double fm = eval(inputs).first;
      inputs[i].data[j] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double analytic = leaves[i].has_grad() ? leaves[i].grad().data[j] : 0.0;
      double rel = std::fabs(analytic - numeric) /
                   std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

/// Gradient check against a model's parameters: the builder constructs a
/// scalar loss binding params through the Binder; the oracle perturbs the
/// parameter tensors in place. Transforms are forced to identity, as above.
inline double grad_check_params(const std::function<Var(Binder&)>& build,
                                const std::vector<Param*>& params, double h = 1e-5) {
  auto eval = [&]() {
    Binder bind;
    Var loss = build(bind);
    if (loss.value().numel() != 1)
      throw std::invalid_argument("grad_check_params: builder must return a scalar loss");
    return std::pair<double, Binder>(loss.value().data[0], std::move(bind));
  };
  double v0 = eval().first;
  if (v0 != eval().first)
    throw std::runtime_error("grad_check_params: non-deterministic builder");

  Binder bind;
  Var loss = build(bind);
  backward(loss, /*apply_transforms=*/false);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(bind.grad_of(*p));

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& value = params[i]->value;
    for (std::size_t j = 0; j < value.data.size(); ++j) {
      double orig = value.data[j];
      value.data[j] = orig + h;
      double fp = eval().first;
      value.data[j] = orig - h;
      double fm = eval().first;
      value.data[j] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double rel = std::fabs(analytic[i].data[j] - numeric) /
                   std::max({std::fabs(analytic[i].data[j]), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace emocat

#endif  // EMOCAT_GRAD_CHECK_HPP_

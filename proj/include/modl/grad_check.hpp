// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "modl/graph.hpp"

namespace modl {

/// Builds a scalar loss on `g` from the parameter nodes created for the
/// evaluation point (one node per tensor, in order).
using ScalarGraphFn = std::function<NodeId(Graph& g, std::span<const NodeId> params)>;

namespace detail {

inline double evaluate_at(const ScalarGraphFn& fn, const std::vector<Tensor>& point) {
  Graph g;
  std::vector<NodeId> ids;
  for (const Tensor& t : point) ids.push_back(g.parameter(t));
  const Tensor& out = g.value(fn(g, ids));
  if (out.size() != 1) throw ContractError("grad_check: function is not scalar-valued");
  if (!std::isfinite(out.data[0])) throw NumericError("grad_check: non-finite function value");
  return out.data[0];
}

}  // namespace detail

/// Max over coordinates of |analytic - numeric| / max(1, |numeric|), where
/// numeric is the central difference with the given step.
inline double grad_check(const ScalarGraphFn& fn, std::span<const Tensor> point, double step) {
  if (!(step > 0.0)) throw ContractError("grad_check: step must be positive");
  std::vector<Tensor> x(point.begin(), point.end());

  Graph g;
  std::vector<NodeId> ids;
  for (const Tensor& t : x) ids.push_back(g.parameter(t));
  const NodeId loss = fn(g, ids);
  if (!std::isfinite(g.value(loss).data.at(0))) throw NumericError("grad_check: non-finite function value");
  const std::vector<Tensor> analytic = g.backward(loss);

  double worst = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t j = 0; j < x[t].size(); ++j) {
      const double orig = x[t].data[j];
      x[t].data[j] = orig + step;
      const double up = detail::evaluate_at(fn, x);
      x[t].data[j] = orig - step;
      const double down = detail::evaluate_at(fn, x);
      x[t].data[j] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[t].data[j];
      if (!std::isfinite(a)) throw NumericError("grad_check: non-finite analytic gradient");
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace modl

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "modl/common.hpp"
#include "modl/tensor.hpp"

namespace modl {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_parameters(const std::vector<Tensor>& params, double beta1 = 0.9, double beta2 = 0.999,
                                  double epsilon = 1e-8) {
    AdamState s;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (const Tensor& p : params) {
      s.first_moment.emplace_back(p.shape, std::vector<double>(p.size(), 0.0));
      s.second_moment.emplace_back(p.shape, std::vector<double>(p.size(), 0.0));
    }
    return s;
  }
};

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite or shapes disagree.
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                         std::to_string(grads.size()) + " gradients, " + std::to_string(state.first_moment.size()) +
                         " moment slots");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.first_moment[i]))
      throw DimensionError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": " +
                           params[i].shape_string() + " vs gradient " + grads[i].shape_string());
    if (!grads[i].all_finite())
      throw NumericError("adam_step: non-finite gradient in parameter " + std::to_string(i) + "; update rejected");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    auto& m = state.first_moment[i].data;
    auto& v = state.second_moment[i].data;
    const auto& g = grads[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace modl

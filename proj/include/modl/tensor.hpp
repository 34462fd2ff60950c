// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "modl/common.hpp"

namespace modl {

/// Dense row-major tensor of doubles. Everything in this library is rank 2
/// (scalars are 1x1, bias vectors 1xN) but the shape is kept general so
/// checkpoints can describe it.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : shape{rows, cols}, data(rows * cols, fill) {}
  Tensor(std::vector<std::size_t> shp, std::vector<double> values)
      : shape(std::move(shp)), data(std::move(values)) {
    if (element_count(shape) != data.size())
      throw DimensionError("tensor shape " + shape_string() + " does not match " +
                           std::to_string(data.size()) + " values");
  }

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

  static std::size_t element_count(const std::vector<std::size_t>& shp) {
    return std::accumulate(shp.begin(), shp.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  /// Copy of the listed rows, in the listed order.
  Tensor gather_rows(std::span<const std::size_t> idx) const {
    Tensor out(idx.size(), cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = row(idx[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace modl

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "modl/common.hpp"
#include "modl/graph.hpp"
#include "modl/model_spec.hpp"

namespace modl {

/// Weights and biases, ordered W0, b0, W1, b1, ... Wi is fan_in x fan_out,
/// bi is 1 x fan_out.
struct Parameters {
  std::vector<Tensor> tensors;

  std::size_t layer_count() const { return tensors.size() / 2; }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.size();
    return n;
  }
  /// Content checksum, for freeze/determinism checks.
  std::uint64_t checksum() const {
    std::uint64_t h = 0;
    for (const auto& t : tensors) h = crc64(t.data.data(), t.data.size() * sizeof(double), h);
    return h;
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

inline void check_parameters(const ModelSpec& spec, const Parameters& params) {
  const auto w = spec.widths();
  if (params.tensors.size() != 2 * (w.size() - 1))
    throw DimensionError("model '" + spec.name + "': expected " + std::to_string(2 * (w.size() - 1)) +
                         " parameter tensors, got " + std::to_string(params.tensors.size()));
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const Tensor& W = params.tensors[2 * l];
    const Tensor& b = params.tensors[2 * l + 1];
    if (W.shape != std::vector<std::size_t>{w[l], w[l + 1]} || b.shape != std::vector<std::size_t>{1, w[l + 1]})
      throw DimensionError("model '" + spec.name + "' layer " + std::to_string(l) + ": expected weight [" +
                           std::to_string(w[l]) + "x" + std::to_string(w[l + 1]) + "], got " + W.shape_string() +
                           " / bias " + b.shape_string());
  }
}

/// Glorot-uniform weights from the spec's seed, zero biases.
inline Parameters init_parameters(const ModelSpec& spec, std::uint64_t seed_offset = 0) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.init_seed, seed_offset, 0x1417));
  const auto w = spec.widths();
  Parameters p;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w[l] + w[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor W(w[l], w[l + 1]);
    for (double& v : W.data) v = u(rng);
    p.tensors.push_back(std::move(W));
    p.tensors.emplace_back(1, w[l + 1]);
  }
  return p;
}

/// Appends the forward pass to `g` and returns the NxC sigmoid output node.
/// `params` holds one node per parameter tensor.
inline NodeId build_forward(Graph& g, const ModelSpec& spec, std::span<const NodeId> params, NodeId features) {
  const auto w = spec.widths();
  if (params.size() != 2 * (w.size() - 1))
    throw DimensionError("model '" + spec.name + "': wrong number of parameter nodes");
  if (g.value(features).cols() != spec.input_width)
    throw DimensionError("model '" + spec.name + "' layer 0: input width " +
                         std::to_string(g.value(features).cols()) + " does not match spec input width " +
                         std::to_string(spec.input_width));
  NodeId h = features;
  const std::size_t layers = w.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string tag = spec.name + ".layer" + std::to_string(l);
    if (g.value(params[2 * l]).rows() != g.value(h).cols())
      throw DimensionError("model '" + spec.name + "' layer " + std::to_string(l) + ": weight " +
                           g.value(params[2 * l]).shape_string() + " does not accept width " +
                           std::to_string(g.value(h).cols()));
    h = add_bias(g, matmul(g, h, params[2 * l], tag + ".matmul"), params[2 * l + 1], tag + ".bias");
    if (l + 1 < layers)
      h = spec.activation == Activation::Relu ? relu(g, h, tag + ".relu") : tanh(g, h, tag + ".tanh");
  }
  return sigmoid(g, h, spec.name + ".out");
}

/// Per-class probabilities for a batch of feature rows.
inline Tensor forward(const ModelSpec& spec, const Parameters& params, const Tensor& features) {
  check_parameters(spec, params);
  Graph g;
  std::vector<NodeId> ids;
  for (const Tensor& t : params.tensors) ids.push_back(g.constant(t));
  const NodeId x = g.constant(features, "features");
  return g.value(build_forward(g, spec, ids, x));
}

// Checkpoint file: "MODLCKPT", u32 version, u64 spec hash, u64 layer count,
// then per layer u64 fan_in, u64 fan_out, fan_in*fan_out weight values and
// fan_out bias values, all little-endian 64-bit, then a CRC-64 of the rest.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<char> encode_checkpoint(const ModelSpec& spec, const Parameters& params) {
  check_parameters(spec, params);
  ByteWriter w;
  w.raw("MODLCKPT");
  w.u32(kCheckpointVersion);
  w.u64(spec.hash());
  w.u64(params.layer_count());
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    const Tensor& W = params.tensors[2 * l];
    w.u64(W.rows());
    w.u64(W.cols());
    for (double v : W.data) w.f64(v);
    for (double v : params.tensors[2 * l + 1].data) w.f64(v);
  }
  w.checksum();
  return w.bytes();
}

inline Parameters decode_checkpoint(const ModelSpec& spec, std::vector<char> bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  r.verify_checksum();
  if (r.raw(8) != "MODLCKPT") throw ParseError(what + ": not a checkpoint file");
  if (r.u32() != kCheckpointVersion) throw ParseError(what + ": unsupported checkpoint version");
  if (r.u64() != spec.hash()) throw ParseError(what + ": checkpoint was written for a different model spec");
  const std::uint64_t layers = r.u64();
  Parameters p;
  for (std::uint64_t l = 0; l < layers; ++l) {
    const std::size_t rows = r.u64(), cols = r.u64();
    if (rows * cols > r.remaining() / 8) throw ParseError(what + ": truncated layer " + std::to_string(l));
    Tensor W(rows, cols);
    for (double& v : W.data) v = r.f64();
    Tensor b(1, cols);
    for (double& v : b.data) v = r.f64();
    p.tensors.push_back(std::move(W));
    p.tensors.push_back(std::move(b));
  }
  if (!r.done()) throw ParseError(what + ": trailing bytes after last layer");
  check_parameters(spec, p);
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const Parameters& params) {
  write_file_atomic(path, encode_checkpoint(spec, params));
}

inline Parameters load_checkpoint(const std::filesystem::path& path, const ModelSpec& spec) {
  return decode_checkpoint(spec, read_file_bytes(path), path.string());
}

}  // namespace modl

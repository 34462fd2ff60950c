// SPDX-License-Identifier: Apache-2.0
/**
 * @file   model_spec.hpp
 * @brief  Multi-layer perceptron specs for the reference models and the
 *         target model, plus the default six-reference zoo.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modl/common.hpp"

namespace modl {

enum class Activation { Relu, Tanh };

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "' (expected relu or tanh)");
}

struct ModelSpec {
  std::string name;
  std::vector<std::size_t> hidden;
  Activation activation = Activation::Relu;
  std::uint64_t init_seed = 0;
  std::size_t input_width = 0;
  std::size_t output_width = 0;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

  void validate() const {
    if (hidden.empty()) throw ContractError("model '" + name + "': at least one hidden layer is required");
    if (input_width == 0 || output_width == 0)
      throw ContractError("model '" + name + "': input and output widths must be positive");
    for (std::size_t w : hidden)
      if (w == 0) throw ContractError("model '" + name + "': hidden widths must be positive");
  }

  /// Layer widths from input to output.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_width};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output_width);
    return w;
  }

  std::string canonical() const {
    std::string s = name + "|" + to_string(activation) + "|" + std::to_string(init_seed) + "|" +
                    std::to_string(input_width) + "|" + std::to_string(output_width) + "|";
    for (std::size_t w : hidden) s += std::to_string(w) + ",";
    return s;
  }

  std::uint64_t hash() const { return hash_string(canonical()); }
};

/// Trainable weights plus biases.
inline std::size_t param_count(const ModelSpec& spec) {
  spec.validate();
  const auto w = spec.widths();
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) n += w[i] * w[i + 1] + w[i + 1];
  return n;
}

struct Zoo {
  std::vector<ModelSpec> references;
  ModelSpec target;

  void validate() const {
    if (references.empty()) throw ContractError("zoo needs at least one reference model");
    for (std::size_t i = 0; i < references.size(); ++i) {
      references[i].validate();
      for (std::size_t j = 0; j < i; ++j)
        if (references[i].name == references[j].name)
          throw ContractError("duplicate model name '" + references[i].name + "' in zoo");
      if (references[i].name == target.name)
        throw ContractError("target name '" + target.name + "' collides with a reference");
    }
    target.validate();
  }

  std::size_t ensemble_param_count() const {
    std::size_t n = 0;
    for (const auto& r : references) n += param_count(r);
    return n;
  }
};

/// Six heterogeneous references (width, depth, activation and seed all vary)
/// and a [128, 64] target.
inline Zoo default_zoo(std::size_t input_width, std::size_t classes) {
  if (input_width == 0 || classes == 0) throw ContractError("default_zoo: D and C must be positive");
  struct Layout {
    const char* name;
    std::vector<std::size_t> hidden;
    Activation act;
    std::uint64_t seed;
  };
  const std::vector<Layout> layouts = {
      {"ref-mlp64", {64}, Activation::Relu, 101},
      {"ref-mlp128", {128}, Activation::Tanh, 202},
      {"ref-mlp64x64", {64, 64}, Activation::Relu, 303},
      {"ref-mlp128x64", {128, 64}, Activation::Tanh, 404},
      {"ref-mlp256", {256}, Activation::Relu, 505},
      {"ref-mlp64x32x16", {64, 32, 16}, Activation::Tanh, 606},
  };
  Zoo zoo;
  for (const auto& l : layouts)
    zoo.references.push_back({l.name, l.hidden, l.act, l.seed, input_width, classes});
  zoo.target = {"target-mlp128x64", {128, 64}, Activation::Relu, 777, input_width, classes};
  return zoo;
}

}  // namespace modl

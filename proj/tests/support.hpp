// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit and acceptance tests.
#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "modl/modl.hpp"

namespace modl::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("modl-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (double& v : t.data) v = u(rng);
  return t;
}

inline ResolvedTargets all_in(Tensor values) {
  ResolvedTargets t{std::move(values), {}};
  t.mask.assign(t.values.size(), 1);
  return t;
}

inline SoftLabelDistribution soft_from(Tensor values) {
  SoftLabelDistribution d;
  for (std::size_t i = 0; i < values.rows(); ++i) d.sample_ids.push_back(i);
  d.values = std::move(values);
  d.sources = {1};
  return d;
}

inline std::string slurp(const std::filesystem::path& p) {
  const auto b = read_file_bytes(p);
  return {b.begin(), b.end()};
}

/// Small, fast experiment config for pipeline tests.
inline ExperimentConfig tiny_config(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.dataset.synth.n_samples = 240;
  c.dataset.synth.feature_width = 6;
  c.dataset.synth.classes = 3;
  c.dataset.synth.flip_rate = 0.2;
  c.dataset.synth.uncertain_fraction = 0.15;
  c.dataset.synth.seed = 3;
  Zoo z;
  z.references = {{"ref-a", {8}, Activation::Relu, 11, 1, 1},
                  {"ref-b", {8, 4}, Activation::Tanh, 12, 1, 1},
                  {"ref-c", {12}, Activation::Tanh, 13, 1, 1}};
  z.target = {"target", {8, 4}, Activation::Relu, 21, 1, 1};
  c.zoo = z;
  c.train.epochs = 2;
  c.train.k = 3;
  c.train.base_lr = 0.01;
  c.eval.seeds = {0, 1};
  c.eval.k_sweep = {2, 3};
  c.output_dir = out;
  return c;
}

}  // namespace modl::testing

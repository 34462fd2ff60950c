// SPDX-License-Identifier: Apache-2.0
/**
 * @file   dataset.hpp
 * @brief  Synthetic noisy multi-label data, CheXpert-style CSV label files
 *         and seeded train/valid/test splits.
 */
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "modl/common.hpp"
#include "modl/graph.hpp"
#include "modl/tensor.hpp"

namespace modl {

enum class RawLabel : std::uint8_t { Positive, Negative, Uncertain, Unmentioned };

struct Sample {
  std::uint64_t id = 0;
  std::vector<double> features;
  std::vector<RawLabel> raw_labels;
  std::vector<double> true_probs;  // synthetic data only; empty otherwise

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  std::string provenance;

  std::size_t size() const { return samples.size(); }
  std::size_t classes() const { return class_names.size(); }
  std::size_t feature_width() const { return samples.empty() ? 0 : samples.front().features.size(); }
  bool has_true_probs() const {
    return !samples.empty() && std::all_of(samples.begin(), samples.end(),
                                           [](const Sample& s) { return !s.true_probs.empty(); });
  }

  Tensor feature_matrix() const {
    Tensor X(size(), feature_width());
    for (std::size_t i = 0; i < size(); ++i) std::copy(samples[i].features.begin(), samples[i].features.end(), X.row(i).begin());
    return X;
  }

  std::vector<std::uint64_t> ids() const {
    std::vector<std::uint64_t> out;
    for (const auto& s : samples) out.push_back(s.id);
    return out;
  }

  /// Copy without the synthetic oracle probabilities.
  Dataset without_true_probs() const {
    Dataset d = *this;
    for (auto& s : d.samples) s.true_probs.clear();
    return d;
  }

  /// Content hash over ids, features, labels and class names.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0;
    for (const auto& c : class_names) h = crc64(c.data(), c.size(), h);
    for (const auto& s : samples) {
      h = crc64(&s.id, sizeof s.id, h);
      h = crc64(s.features.data(), s.features.size() * sizeof(double), h);
      h = crc64(s.raw_labels.data(), s.raw_labels.size(), h);
    }
    return h;
  }

  /// Provenance is deliberately not compared.
  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.samples == b.samples && a.class_names == b.class_names;
  }
};

struct SynthConfig {
  std::size_t n_samples = 4000;
  std::size_t feature_width = 32;
  std::size_t classes = 5;
  double flip_rate = 0.1;
  double uncertain_fraction = 0.15;
  double separation = 3.0;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_samples == 0 || feature_width == 0 || classes == 0)
      throw ConfigError("synthetic: n_samples, feature_width and classes must be positive");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(flip_rate)) throw ConfigError("synthetic: flip_rate must be in [0, 1]");
    if (!prob(uncertain_fraction)) throw ConfigError("synthetic: uncertain_fraction must be in [0, 1]");
    if (flip_rate + uncertain_fraction > 1.0)
      throw ConfigError("synthetic: flip_rate + uncertain_fraction must not exceed 1");
    if (!(separation > 0.0) || !std::isfinite(separation))
      throw ConfigError("synthetic: separation must be a positive finite number");
  }
};

/// Each class gets a random unit prototype; a sample's true probability for
/// the class is sigmoid(separation * <x, prototype>) with x ~ N(0, I). The
/// clean label thresholds that at 0.5, is flipped with probability
/// flip_rate, and is then replaced by Uncertain with probability
/// uncertain_fraction.
inline Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x5e7));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> prototypes(cfg.classes, std::vector<double>(cfg.feature_width));
  for (auto& p : prototypes) {
    double norm = 0.0;
    for (double& v : p) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : p) v /= norm;
  }

  Dataset d;
  d.provenance = "synthetic seed=" + std::to_string(cfg.seed);
  for (std::size_t c = 0; c < cfg.classes; ++c) d.class_names.push_back("class" + std::to_string(c));
  d.samples.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    Sample s;
    s.id = i;
    s.features.resize(cfg.feature_width);
    for (double& v : s.features) v = normal(rng);
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      double align = 0.0;
      for (std::size_t k = 0; k < cfg.feature_width; ++k) align += s.features[k] * prototypes[c][k];
      const double p = sigmoid(cfg.separation * align);
      s.true_probs.push_back(p);
      bool positive = p >= 0.5;
      if (unit(rng) < cfg.flip_rate) positive = !positive;
      const bool uncertain = unit(rng) < cfg.uncertain_fraction;
      s.raw_labels.push_back(uncertain ? RawLabel::Uncertain : positive ? RawLabel::Positive : RawLabel::Negative);
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

// CSV

namespace detail {

/// Splits on commas, keeping empty fields (including a trailing one).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && std::isfinite(out);
}

inline std::string where(std::size_t line, std::size_t col) {
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline RawLabel parse_label_token(const std::string& raw, std::size_t line, std::size_t col) {
  const std::string t = detail::trim(raw);
  if (t.empty()) return RawLabel::Unmentioned;
  if (t == "1" || t == "1.0") return RawLabel::Positive;
  if (t == "0" || t == "0.0") return RawLabel::Negative;
  if (t == "-1" || t == "-1.0") return RawLabel::Uncertain;
  throw ParseError("unknown label token '" + t + "' at " + detail::where(line, col));
}

inline const char* label_token(RawLabel l) {
  switch (l) {
    case RawLabel::Positive: return "1";
    case RawLabel::Negative: return "0";
    case RawLabel::Uncertain: return "-1";
    case RawLabel::Unmentioned: return "";
  }
  return "";
}

/// Reads `id,f0..f{D-1},<class columns>` with label tokens 1 / 0 / -1 /
/// empty for positive / negative / uncertain / unmentioned.
inline Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  const auto header = detail::split_csv_line(line);
  if (header.empty() || detail::trim(header[0]) != "id")
    throw ParseError(path.string() + ": first header column must be 'id'");
  std::size_t D = 0;
  while (1 + D < header.size() && detail::trim(header[1 + D]) == "f" + std::to_string(D)) ++D;
  Dataset d;
  d.provenance = path.string();
  for (std::size_t c = 1 + D; c < header.size(); ++c) d.class_names.push_back(detail::trim(header[c]));
  if (d.class_names.empty()) throw ParseError(path.string() + ": header declares no class columns");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw ParseError(path.string() + ": " + detail::where(lineno, f.size()) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    Sample s;
    const std::string idt = detail::trim(f[0]);
    auto [p, ec] = std::from_chars(idt.data(), idt.data() + idt.size(), s.id);
    if (ec != std::errc() || p != idt.data() + idt.size() || idt.empty())
      throw ParseError(path.string() + ": bad id '" + idt + "' at " + detail::where(lineno, 1));
    for (std::size_t k = 0; k < D; ++k) {
      double v = 0.0;
      if (!detail::parse_double(f[1 + k], v))
        throw ParseError(path.string() + ": bad feature value '" + f[1 + k] + "' at " + detail::where(lineno, 2 + k));
      s.features.push_back(v);
    }
    for (std::size_t c = 1 + D; c < f.size(); ++c) s.raw_labels.push_back(parse_label_token(f[c], lineno, c + 1));
    d.samples.push_back(std::move(s));
  }
  std::vector<std::uint64_t> ids = d.ids();
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ParseError(path.string() + ": duplicate sample id");
  return d;
}

inline std::string to_csv(const Dataset& d) {
  std::string out = "id";
  for (std::size_t k = 0; k < d.feature_width(); ++k) out += ",f" + std::to_string(k);
  for (const auto& c : d.class_names) out += "," + c;
  out += "\n";
  for (const auto& s : d.samples) {
    out += std::to_string(s.id);
    for (double v : s.features) out += "," + format_double(v);
    for (RawLabel l : s.raw_labels) out += std::string(",") + label_token(l);
    out += "\n";
  }
  return out;
}

inline void write_csv(const Dataset& d, const std::filesystem::path& path) { write_file_atomic(path, to_csv(d)); }

/// Sidecar with the oracle probabilities: `id,<class columns>`.
inline void write_true_probs(const Dataset& d, const std::filesystem::path& path) {
  if (!d.has_true_probs()) throw ContractError("dataset has no true probabilities to export");
  std::string out = "id";
  for (const auto& c : d.class_names) out += "," + c;
  out += "\n";
  for (const auto& s : d.samples) {
    out += std::to_string(s.id);
    for (double p : s.true_probs) out += "," + format_double(p);
    out += "\n";
  }
  write_file_atomic(path, out);
}

struct SplitFractions {
  double train = 0.7;
  double valid = 0.1;
  double test = 0.2;
};

/// Split sizes by largest remainder; ties go to the earlier split.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitFractions& f) {
  const std::array<double, 3> fr{f.train, f.valid, f.test};
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fr[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) sizes[order[k % 3]] += 1;
  return sizes;
}

struct SplitDatasets {
  Dataset train, valid, test;
};

inline SplitDatasets split(const Dataset& d, const SplitFractions& f, std::uint64_t seed) {
  if (d.size() < 3) throw ContractError("split: need at least 3 samples, got " + std::to_string(d.size()));
  if (!(f.train > 0 && f.valid > 0 && f.test > 0) || std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
    throw ContractError("split: fractions must be positive and sum to 1");
  const auto sizes = split_sizes(d.size(), f);
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0x5b1));
  std::shuffle(perm.begin(), perm.end(), rng);

  SplitDatasets out;
  Dataset* parts[3] = {&out.train, &out.valid, &out.test};
  const char* tags[3] = {"train", "valid", "test"};
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    parts[p]->class_names = d.class_names;
    parts[p]->provenance = d.provenance + " [" + tags[p] + "]";
    for (std::size_t i = 0; i < sizes[p]; ++i) parts[p]->samples.push_back(d.samples[perm[pos++]]);
  }
  return out;
}

}  // namespace modl

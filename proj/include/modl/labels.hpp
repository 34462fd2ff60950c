// SPDX-License-Identifier: Apache-2.0
/**
 * @file   labels.hpp
 * @brief  Uncertain-label policies and the averaged soft label distribution
 *         produced by the reference models.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "modl/common.hpp"
#include "modl/dataset.hpp"
#include "modl/tensor.hpp"

namespace modl {

struct LabelPolicy {
  enum class Kind { UIgnore, UOnes, UZeros, LsrOnes, LsrZeros };
  Kind kind = Kind::UOnes;
  double a = 0.0;
  double b = 0.0;

  static LabelPolicy ignore() { return {Kind::UIgnore}; }
  static LabelPolicy ones() { return {Kind::UOnes}; }
  static LabelPolicy zeros() { return {Kind::UZeros}; }
  static LabelPolicy lsr_ones(double a = 0.55, double b = 0.85) { return {Kind::LsrOnes, a, b}; }
  static LabelPolicy lsr_zeros(double a = 0.0, double b = 0.3) { return {Kind::LsrZeros, a, b}; }

  bool is_lsr() const { return kind == Kind::LsrOnes || kind == Kind::LsrZeros; }

  void validate() const {
    if (!is_lsr()) return;
    if (!(a >= 0.0 && a < b && b <= 1.0))
      throw PolicyError("LSR bounds must satisfy 0 <= a < b <= 1 (got a=" + format_double(a) +
                        ", b=" + format_double(b) + ")");
    if (kind == Kind::LsrOnes && a < 0.5) throw PolicyError("LsrOnes bounds must lie near one (a >= 0.5)");
    if (kind == Kind::LsrZeros && b > 0.5) throw PolicyError("LsrZeros bounds must lie near zero (b <= 0.5)");
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::UIgnore: return "u-ignore";
      case Kind::UOnes: return "u-ones";
      case Kind::UZeros: return "u-zeros";
      case Kind::LsrOnes: return "lsr-ones(" + format_double(a) + "," + format_double(b) + ")";
      case Kind::LsrZeros: return "lsr-zeros(" + format_double(a) + "," + format_double(b) + ")";
    }
    return "?";
  }

  friend bool operator==(const LabelPolicy&, const LabelPolicy&) = default;
};

inline LabelPolicy parse_policy(const std::string& name, double a, double b) {
  if (name == "u-ignore") return LabelPolicy::ignore();
  if (name == "u-ones") return LabelPolicy::ones();
  if (name == "u-zeros") return LabelPolicy::zeros();
  if (name == "lsr-ones") return LabelPolicy::lsr_ones(a, b);
  if (name == "lsr-zeros") return LabelPolicy::lsr_zeros(a, b);
  throw PolicyError("unknown label policy '" + name + "'");
}

/// How the fourth label state is treated.
enum class UnmentionedRule { Negative, Ignore };

/// Per-slot training targets. mask == 0 means the slot is left out of the
/// classification loss entirely.
struct ResolvedTargets {
  Tensor values;
  std::vector<std::uint8_t> mask;

  std::size_t rows() const { return values.rows(); }
  std::size_t cols() const { return values.cols(); }

  ResolvedTargets gather_rows(std::span<const std::size_t> idx) const {
    ResolvedTargets out{values.gather_rows(idx), {}};
    out.mask.reserve(idx.size() * cols());
    for (std::size_t i : idx)
      out.mask.insert(out.mask.end(), mask.begin() + static_cast<std::ptrdiff_t>(i * cols()),
                      mask.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols()));
    return out;
  }

  friend bool operator==(const ResolvedTargets&, const ResolvedTargets&) = default;
};

/// Maps raw labels to targets. Uncertain slots under LSR policies draw
/// U(a, b) in row-major slot order from a stream seeded by `seed`.
inline ResolvedTargets resolve(const Dataset& d, const LabelPolicy& policy, std::uint64_t seed,
                               UnmentionedRule unmentioned = UnmentionedRule::Negative) {
  policy.validate();
  const std::size_t C = d.classes();
  ResolvedTargets t{Tensor(d.size(), C), std::vector<std::uint8_t>(d.size() * C, 1)};
  std::mt19937_64 rng(derive_seed(seed, 0x1abe1));
  std::uniform_real_distribution<double> u(policy.a, policy.b);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& raw = d.samples[i].raw_labels;
    if (raw.size() != C)
      throw DimensionError("sample " + std::to_string(d.samples[i].id) + " has " + std::to_string(raw.size()) +
                           " labels, expected " + std::to_string(C));
    for (std::size_t c = 0; c < C; ++c) {
      double& v = t.values(i, c);
      std::uint8_t& m = t.mask[i * C + c];
      switch (raw[c]) {
        case RawLabel::Positive: v = 1.0; break;
        case RawLabel::Negative: v = 0.0; break;
        case RawLabel::Unmentioned:
          v = 0.0;
          m = unmentioned == UnmentionedRule::Negative ? 1 : 0;
          break;
        case RawLabel::Uncertain:
          switch (policy.kind) {
            case LabelPolicy::Kind::UIgnore: v = 0.0; m = 0; break;
            case LabelPolicy::Kind::UOnes: v = 1.0; break;
            case LabelPolicy::Kind::UZeros: v = 0.0; break;
            case LabelPolicy::Kind::LsrOnes:
            case LabelPolicy::Kind::LsrZeros: v = u(rng); break;
          }
          break;
      }
    }
  }
  return t;
}

/// Binary ground truth from the synthetic oracle: 1 iff true_prob >= 0.5.
inline ResolvedTargets clean_targets(const Dataset& d) {
  if (!d.has_true_probs()) throw ContractError("clean_targets: dataset carries no true probabilities");
  const std::size_t C = d.classes();
  ResolvedTargets t{Tensor(d.size(), C), std::vector<std::uint8_t>(d.size() * C, 1)};
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t c = 0; c < C; ++c) t.values(i, c) = d.samples[i].true_probs[c] >= 0.5 ? 1.0 : 0.0;
  return t;
}

struct SoftLabelDistribution {
  std::vector<std::uint64_t> sample_ids;
  Tensor values;                         // samples x C
  std::vector<std::uint64_t> sources;    // spec hashes of contributing references

  std::size_t size() const { return sample_ids.size(); }
  std::size_t classes() const { return values.cols(); }
  std::span<const double> row(std::size_t i) const { return values.row(i); }

  friend bool operator==(const SoftLabelDistribution&, const SoftLabelDistribution&) = default;
};

struct ModelPredictions {
  std::string model;
  std::uint64_t source_hash = 0;
  Tensor probs;  // samples x C
};

/// Elementwise mean over the N reference predictions. The mean is clamped to
/// the min/max of its contributors so it never leaves their envelope through
/// rounding.
inline SoftLabelDistribution aggregate_soft_labels(std::span<const ModelPredictions> preds,
                                                   std::vector<std::uint64_t> sample_ids) {
  if (preds.empty()) throw ContractError("aggregate_soft_labels: no reference predictions");
  const Tensor& first = preds.front().probs;
  if (first.rows() != sample_ids.size())
    throw DimensionError("aggregate_soft_labels: model '" + preds.front().model + "' predicted " +
                         std::to_string(first.rows()) + " rows for " + std::to_string(sample_ids.size()) + " samples");
  for (const auto& p : preds) {
    if (!p.probs.same_shape(first))
      throw DimensionError("aggregate_soft_labels: model '" + p.model + "' has shape " + p.probs.shape_string() +
                           ", expected " + first.shape_string());
    for (double v : p.probs.data)
      if (!(v > 0.0 && v < 1.0))
        throw ContractError("aggregate_soft_labels: model '" + p.model + "' produced a value outside (0, 1)");
  }
  SoftLabelDistribution out{std::move(sample_ids), Tensor(first.rows(), first.cols()), {}};
  const double n = static_cast<double>(preds.size());
  for (std::size_t j = 0; j < first.size(); ++j) {
    double s = 0.0, lo = first.data[j], hi = first.data[j];
    for (const auto& p : preds) {
      const double v = p.probs.data[j];
      s += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out.values.data[j] = std::clamp(s / n, lo, hi);
  }
  for (const auto& p : preds) out.sources.push_back(p.source_hash);
  return out;
}

// Soft-label file: "MODLSOFT", u32 version, u64 sample count, u64 C,
// u64 source count, source hashes, sample ids, row-major f64 values, then a
// CRC-64 of everything before it.

inline std::vector<char> encode_soft_labels(const SoftLabelDistribution& d) {
  ByteWriter w;
  w.raw("MODLSOFT");
  w.u32(1);
  w.u64(d.size());
  w.u64(d.values.cols());
  w.u64(d.sources.size());
  for (auto h : d.sources) w.u64(h);
  for (auto id : d.sample_ids) w.u64(id);
  for (double v : d.values.data) w.f64(v);
  w.checksum();
  return w.bytes();
}

inline SoftLabelDistribution decode_soft_labels(std::vector<char> bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  r.verify_checksum();
  if (r.raw(8) != "MODLSOFT") throw ParseError(what + ": not a soft-label file");
  if (r.u32() != 1) throw ParseError(what + ": unsupported soft-label version");
  const std::size_t n = r.u64(), C = r.u64(), ns = r.u64();
  if (ns > r.remaining() / 8 || n > r.remaining() / 8) throw ParseError(what + ": header counts exceed file size");
  SoftLabelDistribution d;
  for (std::size_t i = 0; i < ns; ++i) d.sources.push_back(r.u64());
  for (std::size_t i = 0; i < n; ++i) d.sample_ids.push_back(r.u64());
  if (n * C != r.remaining() / 8) throw ParseError(what + ": value block has the wrong size");
  d.values = Tensor(n, C);
  for (double& v : d.values.data) v = r.f64();
  if (!r.done()) throw ParseError(what + ": trailing bytes");
  return d;
}

inline void write_soft_labels(const SoftLabelDistribution& d, const std::filesystem::path& path) {
  write_file_atomic(path, encode_soft_labels(d));
}

inline SoftLabelDistribution read_soft_labels(const std::filesystem::path& path) {
  return decode_soft_labels(read_file_bytes(path), path.string());
}

}  // namespace modl

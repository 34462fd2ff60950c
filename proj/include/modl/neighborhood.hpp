// SPDX-License-Identifier: Apache-2.0
/**
 * @file   neighborhood.hpp
 * @brief  Fixed K-nearest-neighbor pool over soft label vectors and the
 *         Gaussian local similarity attached to each neighbor.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "modl/common.hpp"
#include "modl/labels.hpp"

namespace modl {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ContractError("squared_distance: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

inline double similarity_from_sq_distance(double sq_dist, double sigma) {
  return std::exp(-sq_dist / (2.0 * sigma * sigma));
}

/// exp(-||l_i - l_k||^2 / (2 sigma^2)). Candidates outside an anchor's K
/// nearest set are never listed in the pool, so they carry weight 0.
inline double local_similarity(std::span<const double> li, std::span<const double> lk, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("local_similarity: sigma must be positive");
  return similarity_from_sq_distance(squared_distance(li, lk), sigma);
}

struct Neighbor {
  std::uint64_t id = 0;
  double sq_distance = 0.0;
  double similarity = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct AnchorNeighbors {
  std::uint64_t anchor = 0;
  std::vector<Neighbor> neighbors;
  friend bool operator==(const AnchorNeighbors&, const AnchorNeighbors&) = default;
};

struct NeighborPool {
  std::size_t k = 0;            // effective K, after clamping
  std::size_t requested_k = 0;
  double sigma = 1.0;
  bool include_self = false;
  std::vector<AnchorNeighbors> anchors;  // same order as the soft labels
  std::vector<std::string> warnings;

  /// Rebuilds the id lookup; call after editing `anchors` by hand.
  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < anchors.size(); ++i) index_[anchors[i].anchor] = i;
  }

  /// Neighbor list for a sample id, or nullptr when the id is not an anchor.
  const AnchorNeighbors* find(std::uint64_t id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &anchors[it->second];
  }

  friend bool operator==(const NeighborPool& a, const NeighborPool& b) {
    return a.k == b.k && a.requested_k == b.requested_k && a.sigma == b.sigma && a.include_self == b.include_self &&
           a.anchors == b.anchors;
  }

 private:
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Exact brute-force K nearest neighbors of every sample under squared
/// Euclidean distance between soft label rows. Ties are broken by ascending
/// sample id. K larger than the number of candidates is clamped with a
/// warning recorded on the pool.
inline NeighborPool build_neighbor_pool(const SoftLabelDistribution& dist, std::size_t K, double sigma,
                                        bool include_self = false, std::size_t workers = 1) {
  const std::size_t n = dist.size();
  if (K == 0) throw ContractError("build_neighbor_pool: K must be at least 1");
  if (n < 2) throw ContractError("build_neighbor_pool: need at least 2 samples");
  if (!(sigma > 0.0)) throw ContractError("build_neighbor_pool: sigma must be positive");

  NeighborPool pool;
  pool.requested_k = K;
  pool.sigma = sigma;
  pool.include_self = include_self;
  const std::size_t candidates = include_self ? n : n - 1;
  pool.k = std::min(K, candidates);
  if (pool.k < K) {
    pool.warnings.push_back("K=" + std::to_string(K) + " exceeds the " + std::to_string(candidates) +
                            " available neighbors; clamped to " + std::to_string(pool.k));
    log(LogLevel::Warn, pool.warnings.back());
  }
  pool.anchors.resize(n);

  parallel_for(n, workers, [&](std::size_t i) {
    struct Cand {
      double d;
      std::uint64_t id;
    };
    std::vector<Cand> cands;
    cands.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i && !include_self) continue;
      cands.push_back({squared_distance(dist.row(i), dist.row(j)), dist.sample_ids[j]});
    }
    auto less = [](const Cand& a, const Cand& b) { return a.d < b.d || (a.d == b.d && a.id < b.id); };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(pool.k), cands.end(), less);
    AnchorNeighbors& a = pool.anchors[i];
    a.anchor = dist.sample_ids[i];
    for (std::size_t k = 0; k < pool.k; ++k)
      a.neighbors.push_back({cands[k].id, cands[k].d, similarity_from_sq_distance(cands[k].d, sigma)});
  });
  pool.reindex();
  return pool;
}

// Pool file: "MODLPOOL", u32 version, u64 effective K, u64 requested K,
// f64 sigma, u32 include_self, u64 anchor count, then per anchor the anchor
// id followed by K (id, sq_distance, similarity) triples; CRC-64 trailer.

inline std::vector<char> encode_pool(const NeighborPool& p) {
  ByteWriter w;
  w.raw("MODLPOOL");
  w.u32(1);
  w.u64(p.k);
  w.u64(p.requested_k);
  w.f64(p.sigma);
  w.u32(p.include_self ? 1 : 0);
  w.u64(p.anchors.size());
  for (const auto& a : p.anchors) {
    w.u64(a.anchor);
    for (const auto& nb : a.neighbors) {
      w.u64(nb.id);
      w.f64(nb.sq_distance);
      w.f64(nb.similarity);
    }
  }
  w.checksum();
  return w.bytes();
}

inline NeighborPool decode_pool(std::vector<char> bytes, const std::string& what) {
  ByteReader r(std::move(bytes), what);
  r.verify_checksum();
  if (r.raw(8) != "MODLPOOL") throw ParseError(what + ": not a neighbor pool file");
  if (r.u32() != 1) throw ParseError(what + ": unsupported pool version");
  NeighborPool p;
  p.k = r.u64();
  p.requested_k = r.u64();
  p.sigma = r.f64();
  p.include_self = r.u32() != 0;
  const std::size_t n = r.u64();
  if (n * (8 + 24 * p.k) != r.remaining()) throw ParseError(what + ": anchor block has the wrong size");
  p.anchors.resize(n);
  for (auto& a : p.anchors) {
    a.anchor = r.u64();
    a.neighbors.resize(p.k);
    for (auto& nb : a.neighbors) {
      nb.id = r.u64();
      nb.sq_distance = r.f64();
      nb.similarity = r.f64();
    }
  }
  p.reindex();
  return p;
}

inline void write_pool(const NeighborPool& p, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pool(p));
}

inline NeighborPool read_pool(const std::filesystem::path& path) {
  return decode_pool(read_file_bytes(path), path.string());
}

}  // namespace modl

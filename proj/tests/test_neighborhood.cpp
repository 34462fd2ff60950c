// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support.hpp"

using namespace modl;

namespace {

SoftLabelDistribution rows(std::vector<std::vector<double>> r, std::vector<std::uint64_t> ids = {}) {
  const std::size_t n = r.size(), C = r.front().size();
  Tensor t(n, C);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < C; ++c) t(i, c) = r[i][c];
  SoftLabelDistribution d = modl::testing::soft_from(t);
  if (!ids.empty()) d.sample_ids = ids;
  return d;
}

}  // namespace

TEST(Similarity, IdenticalIsOne) {
  const std::vector<double> a{0.3, 0.7};
  EXPECT_EQ(local_similarity(a, a, 1.0), 1.0);
}

TEST(Similarity, OrthogonalCorners) {
  const std::vector<double> a{1, 0}, b{0, 1};
  EXPECT_NEAR(local_similarity(a, b, 1.0), 0.367879441171442, 1e-14);
}

TEST(Similarity, LengthMismatchIsContractError) {
  const std::vector<double> a{1, 0}, b{0, 1, 0};
  EXPECT_THROW(local_similarity(a, b, 1.0), ContractError);
}

TEST(Pool, ThreeSamplesListTheOtherTwoSorted) {
  auto d = rows({{0.0}, {0.1}, {0.5}});
  auto p = build_neighbor_pool(d, 2, 1.0);
  ASSERT_EQ(p.k, 2u);
  EXPECT_EQ(p.anchors[0].neighbors[0].id, 1u);
  EXPECT_EQ(p.anchors[0].neighbors[1].id, 2u);
  EXPECT_EQ(p.anchors[1].neighbors[0].id, 0u);
  EXPECT_EQ(p.anchors[1].neighbors[1].id, 2u);
  EXPECT_EQ(p.anchors[2].neighbors[0].id, 1u);
  EXPECT_EQ(p.anchors[2].neighbors[1].id, 0u);
  EXPECT_DOUBLE_EQ(p.anchors[2].neighbors[1].sq_distance, 0.25);
}

TEST(Pool, IdenticalRowsAreFirstNeighborsWithSimilarityOne) {
  auto d = rows({{0.2, 0.4}, {0.9, 0.9}, {0.2, 0.4}});
  auto p = build_neighbor_pool(d, 1, 1.0);
  EXPECT_EQ(p.anchors[0].neighbors[0].id, 2u);
  EXPECT_EQ(p.anchors[2].neighbors[0].id, 0u);
  EXPECT_EQ(p.anchors[0].neighbors[0].similarity, 1.0);
}

TEST(Pool, TiesBreakByAscendingId) {
  auto d = rows({{0.5}, {0.75}, {0.25}, {0.75}}, {40, 30, 20, 10});
  auto p = build_neighbor_pool(d, 3, 1.0);
  const auto& n = p.find(40)->neighbors;
  // 30, 20 and 10 are all 0.25 away from 40.
  EXPECT_EQ(n[0].id, 10u);
  EXPECT_EQ(n[1].id, 20u);
  EXPECT_EQ(n[2].id, 30u);
}

TEST(Pool, KClampedWithWarning) {
  auto d = rows({{0.1}, {0.2}, {0.3}});
  auto p = build_neighbor_pool(d, 9, 1.0);
  EXPECT_EQ(p.k, 2u);
  EXPECT_EQ(p.requested_k, 9u);
  ASSERT_EQ(p.warnings.size(), 1u);
  for (const auto& a : p.anchors) EXPECT_EQ(a.neighbors.size(), 2u);
  EXPECT_THROW(build_neighbor_pool(rows({{0.1}}), 1, 1.0), ContractError);
  EXPECT_THROW(build_neighbor_pool(d, 0, 1.0), ContractError);
}

TEST(Pool, SelfExcludedUnlessRequested) {
  std::mt19937_64 rng(1);
  auto d = modl::testing::soft_from(modl::testing::random_tensor(30, 3, rng, 0, 1));
  auto p = build_neighbor_pool(d, 5, 1.0);
  for (const auto& a : p.anchors)
    for (const auto& n : a.neighbors) EXPECT_NE(n.id, a.anchor);
  auto q = build_neighbor_pool(d, 5, 1.0, true);
  for (const auto& a : q.anchors) EXPECT_EQ(a.neighbors[0].id, a.anchor);
}

TEST(Pool, SimilaritiesMonotoneAndSigmaScaling) {
  std::mt19937_64 rng(2);
  auto d = modl::testing::soft_from(modl::testing::random_tensor(60, 4, rng, 0, 1));
  auto p1 = build_neighbor_pool(d, 7, 1.0), p2 = build_neighbor_pool(d, 7, 2.0);
  for (std::size_t i = 0; i < p1.anchors.size(); ++i) {
    const auto &a = p1.anchors[i].neighbors, &b = p2.anchors[i].neighbors;
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (k) {
        EXPECT_LE(a[k].similarity, a[k - 1].similarity);
      }
      EXPECT_GT(a[k].similarity, 0.0);
      EXPECT_LE(a[k].similarity, 1.0);
      EXPECT_EQ(a[k].similarity, std::exp(-a[k].sq_distance / 2.0));
      EXPECT_EQ(a[k].id, b[k].id);
      EXPECT_NEAR(b[k].similarity, std::pow(a[k].similarity, 0.25), 1e-14);
    }
  }
}

TEST(Pool, ParallelBuildMatchesSerial) {
  std::mt19937_64 rng(4);
  auto d = modl::testing::soft_from(modl::testing::random_tensor(120, 5, rng, 0, 1));
  EXPECT_EQ(build_neighbor_pool(d, 9, 1.0, false, 1), build_neighbor_pool(d, 9, 1.0, false, 4));
}

TEST(Pool, FileRoundTripAndCorruption) {
  modl::testing::TempDir dir("pool");
  std::mt19937_64 rng(5);
  auto d = modl::testing::soft_from(modl::testing::random_tensor(25, 3, rng, 0, 1));
  auto p = build_neighbor_pool(d, 4, 0.5);
  const auto path = dir.path() / "pool.bin";
  write_pool(p, path);
  NeighborPool q = read_pool(path);
  EXPECT_EQ(p, q);
  ASSERT_NE(q.find(d.sample_ids[3]), nullptr);
  EXPECT_EQ(q.find(d.sample_ids[3])->neighbors, p.anchors[3].neighbors);
  auto bytes = read_file_bytes(path);
  bytes[bytes.size() / 2] ^= 4;
  write_file_atomic(path, bytes);
  EXPECT_THROW(read_pool(path), ChecksumError);
}

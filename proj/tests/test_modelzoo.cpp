// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace modl;

TEST(Zoo, DefaultHasSixDistinctReferencesAndATarget) {
  Zoo z = default_zoo(32, 5);
  ASSERT_EQ(z.references.size(), 6u);
  std::set<std::string> names{z.target.name};
  std::set<std::size_t> counts;
  for (const auto& r : z.references) {
    names.insert(r.name);
    counts.insert(param_count(r));
    EXPECT_EQ(r.input_width, 32u);
    EXPECT_EQ(r.output_width, 5u);
  }
  EXPECT_EQ(names.size(), 7u);
  EXPECT_EQ(counts.size(), 6u);
  EXPECT_NO_THROW(z.validate());
}

TEST(Zoo, Deterministic) {
  Zoo a = default_zoo(32, 5), b = default_zoo(32, 5);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.references[i].canonical(), b.references[i].canonical());
  EXPECT_EQ(a.target.hash(), b.target.hash());
}

TEST(ParamCount, HandCount) {
  EXPECT_EQ(param_count(ModelSpec{"m", {4}, Activation::Relu, 0, 3, 2}), 26u);
  EXPECT_THROW(param_count(ModelSpec{"m", {}, Activation::Relu, 0, 2, 1}), ContractError);
}

TEST(ParamCount, TargetSmallerThanEnsemble) {
  Zoo z = default_zoo(32, 5);
  std::size_t smallest = SIZE_MAX;
  for (const auto& r : z.references) smallest = std::min(smallest, param_count(r));
  EXPECT_LT(param_count(z.target), z.ensemble_param_count());
  EXPECT_GE(z.ensemble_param_count(), 6 * smallest);
}

TEST(Zoo, ValidationErrors) {
  Zoo z = default_zoo(4, 2);
  z.references[1].name = z.references[0].name;
  EXPECT_THROW(z.validate(), ContractError);
  z = default_zoo(4, 2);
  z.references.clear();
  EXPECT_THROW(z.validate(), ContractError);
  EXPECT_THROW(default_zoo(0, 2), ContractError);
  EXPECT_THROW(parse_activation("gelu"), Error);
}

TEST(ModelSpec, HashTracksEveryField) {
  ModelSpec a{"m", {4, 2}, Activation::Relu, 1, 3, 2};
  std::set<std::uint64_t> hashes{a.hash()};
  ModelSpec b = a;
  b.hidden = {4, 3};
  hashes.insert(b.hash());
  b = a;
  b.activation = Activation::Tanh;
  hashes.insert(b.hash());
  b = a;
  b.init_seed = 2;
  hashes.insert(b.hash());
  b = a;
  b.input_width = 4;
  hashes.insert(b.hash());
  EXPECT_EQ(hashes.size(), 5u);
}

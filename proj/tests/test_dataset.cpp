// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "support.hpp"

using namespace modl;
using modl::testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

SynthConfig small_synth(std::size_t n = 200) {
  SynthConfig c;
  c.n_samples = n;
  c.feature_width = 6;
  c.classes = 3;
  return c;
}

}  // namespace

TEST(Synthetic, NoNoiseMeansLabelsEqualThresholdedTruth) {
  SynthConfig c = small_synth();
  c.flip_rate = 0.0;
  c.uncertain_fraction = 0.0;
  Dataset d = generate_synthetic(c);
  ASSERT_EQ(d.size(), 200u);
  for (const auto& s : d.samples)
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_EQ(s.raw_labels[k], s.true_probs[k] >= 0.5 ? RawLabel::Positive : RawLabel::Negative);
}

TEST(Synthetic, SameSeedSameDataset) {
  EXPECT_EQ(generate_synthetic(small_synth()), generate_synthetic(small_synth()));
  SynthConfig other = small_synth();
  other.seed = 8;
  EXPECT_FALSE(generate_synthetic(small_synth()) == generate_synthetic(other));
}

TEST(Synthetic, UncertainCountWithinBinomialInterval) {
  SynthConfig c;
  c.n_samples = 1000;
  c.classes = 5;
  c.uncertain_fraction = 0.15;
  Dataset d = generate_synthetic(c);
  std::size_t n = 0;
  for (const auto& s : d.samples)
    for (auto l : s.raw_labels) n += l == RawLabel::Uncertain;
  // Binomial(5000, 0.15): central 99.9% interval is [668, 834].
  EXPECT_GE(n, 600u);
  EXPECT_LE(n, 900u);
  EXPECT_GE(n, 668u);
  EXPECT_LE(n, 834u);
}

TEST(Synthetic, TrueProbsInUnitIntervalAndIdsUnique) {
  Dataset d = generate_synthetic(small_synth());
  std::set<std::uint64_t> ids;
  for (const auto& s : d.samples) {
    ids.insert(s.id);
    EXPECT_EQ(s.features.size(), 6u);
    for (double p : s.true_probs) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
  }
  EXPECT_EQ(ids.size(), d.size());
}

TEST(Synthetic, InvalidProbabilitiesRejected) {
  SynthConfig c = small_synth();
  c.flip_rate = 1.5;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  c.flip_rate = 0.6;
  c.uncertain_fraction = 0.6;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
}

TEST(Csv, RowMapsToLabels) {
  TempDir dir("csv");
  const auto p = dir.path() / "d.csv";
  write_text(p, "id,f0,f1,a,b,c\n7,0.1,0.2,1,-1,\n");
  Dataset d = load_csv(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.samples[0].id, 7u);
  EXPECT_EQ(d.samples[0].features, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(d.samples[0].raw_labels,
            (std::vector<RawLabel>{RawLabel::Positive, RawLabel::Uncertain, RawLabel::Unmentioned}));
}

TEST(Csv, HeaderOnlyGivesEmptyDataset) {
  TempDir dir("csv");
  const auto p = dir.path() / "d.csv";
  write_text(p, "id,f0,x,y\n");
  Dataset d = load_csv(p);
  EXPECT_EQ(d.size(), 0u);
  EXPECT_EQ(d.classes(), 2u);
}

TEST(Csv, UnknownTokenIsParseErrorWithPosition) {
  TempDir dir("csv");
  const auto p = dir.path() / "d.csv";
  write_text(p, "id,f0,a,b\n1,0.5,1,0\n2,0.5,2,0\n");
  try {
    load_csv(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("line 3"), std::string::npos) << m;
    EXPECT_NE(m.find("column 3"), std::string::npos) << m;
  }
}

TEST(Csv, RaggedRowRejected) {
  TempDir dir("csv");
  const auto p = dir.path() / "d.csv";
  write_text(p, "id,f0,a,b\n1,0.5,1\n");
  EXPECT_THROW(load_csv(p), ParseError);
  write_text(p, "id,f0,a\n1,0.5,1\n1,0.2,0\n");
  EXPECT_THROW(load_csv(p), ParseError);
}

TEST(Csv, RoundTripDropsOnlyTrueProbs) {
  TempDir dir("csv");
  Dataset d = generate_synthetic(small_synth(150));
  write_csv(d, dir.path() / "d.csv");
  EXPECT_EQ(load_csv(dir.path() / "d.csv"), d.without_true_probs());
  write_true_probs(d, dir.path() / "truth.csv");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "truth.csv"));
}

TEST(Split, LargestRemainderSizes) {
  EXPECT_EQ(split_sizes(10, {}), (std::array<std::size_t, 3>{7, 1, 2}));
  EXPECT_EQ(split_sizes(11, {}), (std::array<std::size_t, 3>{8, 1, 2}));
  EXPECT_EQ(split_sizes(3, {1.0 / 3, 1.0 / 3, 1.0 / 3}), (std::array<std::size_t, 3>{1, 1, 1}));
  for (std::size_t n = 3; n < 200; ++n) {
    const auto s = split_sizes(n, {});
    EXPECT_EQ(s[0] + s[1] + s[2], n);
    EXPECT_LE(std::abs(double(s[0]) - 0.7 * n), 1.0);
    EXPECT_LE(std::abs(double(s[1]) - 0.1 * n), 1.0);
    EXPECT_LE(std::abs(double(s[2]) - 0.2 * n), 1.0);
  }
}

TEST(Split, PartitionDeterministicAndComplete) {
  Dataset d = generate_synthetic(small_synth(97));
  auto a = split(d, {}, 5), b = split(d, {}, 5), c = split(d, {}, 6);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_FALSE(a.train == c.train);
  std::multiset<std::uint64_t> all;
  for (const Dataset* p : {&a.train, &a.valid, &a.test})
    for (auto id : p->ids()) all.insert(id);
  const auto orig = d.ids();
  EXPECT_EQ(all, std::multiset<std::uint64_t>(orig.begin(), orig.end()));
  std::set<std::uint64_t> uniq(all.begin(), all.end());
  EXPECT_EQ(uniq.size(), all.size());
}

TEST(Split, TooSmallOrBadFractions) {
  Dataset d = generate_synthetic(small_synth(2));
  EXPECT_THROW(split(d, {}, 1), ContractError);
  Dataset e = generate_synthetic(small_synth(10));
  EXPECT_THROW(split(e, {0.5, 0.5, 0.5}, 1), ContractError);
}

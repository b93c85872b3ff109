#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace opfbovw;

TEST(Distance, HandValues) {
  const std::vector<double> a{0, 0}, b{3, 4}, c{1, 1}, p{1, 2, 3}, q{4, 6, 3};
  EXPECT_DOUBLE_EQ(distance(a, b), 5.0);
  EXPECT_DOUBLE_EQ(distance(c, c), 0.0);
  EXPECT_DOUBLE_EQ(distance(p, q), 5.0);
}

TEST(Distance, DimensionMismatchThrows) {
  const std::vector<double> a{0, 0}, b{0, 0, 0};
  EXPECT_THROW(distance(a, b), InputError);
}

TEST(Distance, SymmetricAndTriangle) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = testsupport::random_points(rng, 3, 1 + trial % 6);
    EXPECT_EQ(distance(s[0], s[1]), distance(s[1], s[0]));
    EXPECT_LE(distance(s[0], s[2]), distance(s[0], s[1]) + distance(s[1], s[2]) + 1e-12);
  }
}

namespace {

Dataset uniform_dataset(std::size_t dim) {
  Dataset d;
  d.dim = dim;
  d.label_set = {"BE", "Cancer"};
  for (std::size_t i = 0; i < 4; ++i) {
    ImageRecord r;
    r.image_id = "img" + std::to_string(i);
    r.label = i % 2;
    r.descriptors = DescriptorSet(dim, std::vector<double>(3 * dim, 0.5));
    d.records.push_back(std::move(r));
  }
  return d;
}

}  // namespace

TEST(ValidateDataset, UniformDimIsClean) { EXPECT_TRUE(validate_dataset(uniform_dataset(64)).empty()); }

TEST(ValidateDataset, OneShortRecord) {
  Dataset d = uniform_dataset(64);
  d.records[2].descriptors = DescriptorSet(63, std::vector<double>(63, 1.0));
  const auto v = validate_dataset(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].record, "img2");
}

TEST(ValidateDataset, EmptyDescriptors) {
  Dataset d = uniform_dataset(8);
  d.records[1].descriptors = DescriptorSet(8);
  const auto v = validate_dataset(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].record, "img1");
  EXPECT_EQ(v[0].rule, "empty descriptors");
}

TEST(ValidateDataset, OtherRules) {
  Dataset d = uniform_dataset(4);
  d.records[3].image_id = "img0";
  d.records[1].label = 7;
  auto values = std::vector<double>(4, 0.0);
  values[2] = std::numeric_limits<double>::quiet_NaN();
  d.records[2].descriptors = DescriptorSet(4, values);
  const auto v = validate_dataset(d);
  std::vector<std::string> rules;
  for (const auto& x : v) rules.push_back(x.rule);
  EXPECT_NE(std::find(rules.begin(), rules.end(), "duplicate image_id"), rules.end());
  EXPECT_NE(std::find(rules.begin(), rules.end(), "label index outside label_set"), rules.end());
  EXPECT_NE(std::find(rules.begin(), rules.end(), "non-finite descriptor value"), rules.end());
}

TEST(ValidateDataset, SingleLabelFlagged) {
  Dataset d = uniform_dataset(4);
  for (auto& r : d.records) r.label = 0;
  const auto v = validate_dataset(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v[0].record.empty());
}

TEST(DescriptorSet, RowsAndSubset) {
  auto s = DescriptorSet::from_rows({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.dim(), 2u);
  const std::vector<std::size_t> pick{2, 0};
  const auto sub = s.subset(pick);
  EXPECT_EQ(sub[0][1], 6.0);
  EXPECT_EQ(sub[1][0], 1.0);
  const std::vector<double> bad{1, 2, 3};
  EXPECT_THROW(s.push_back(bad), InputError);
  EXPECT_THROW(DescriptorSet(2, std::vector<double>{1, 2, 3}), InputError);
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  std::vector<int> hit(1000, 0);
  parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; }, 4);
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 1000);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 5) throw InputError("x"); }, 3), InputError);
}

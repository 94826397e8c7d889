#include <gtest/gtest.h>

#include "rbp/encoding.hpp"
#include "rbp/tensor.hpp"

using namespace rbp;

TEST(Tensor, ShapeMatchesValueCount) {
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t(1, 2), 6.0);
  EXPECT_EQ(t.row(1)[0], 4.0);
}

TEST(Tensor, RejectsMismatchedValues) {
  EXPECT_THROW(Tensor::matrix(2, 2, {1, 2, 3}), ShapeError);
}

TEST(Tensor, RejectsZeroDimension) {
  EXPECT_THROW(Tensor::matrix(0, 3), ShapeError);
}

TEST(Tensor, VectorIsOneRow) {
  Tensor v = Tensor::vector({1, 2, 3});
  EXPECT_EQ(v.rows(), 1u);
  EXPECT_EQ(v.cols(), 3u);
  EXPECT_TRUE(same_shape(v, Tensor::matrix(1, 3)));
}

TEST(Tensor, FinitenessCheck) {
  Tensor t = Tensor::matrix(1, 2, {1.0, 2.0});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(OneHot, EncodesIndex) {
  Tensor t = one_hot_encode(2, 4);
  EXPECT_EQ(std::vector<double>(t.values().begin(), t.values().end()), (std::vector<double>{0, 0, 1, 0}));
  EXPECT_TRUE(is_one_hot(t));
}

TEST(OneHot, DegenerateVocabulary) {
  Tensor t = one_hot_encode(0, 1);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0], 1.0);
}

TEST(OneHot, OutOfRangeRejected) {
  EXPECT_THROW(one_hot_encode(4, 4), std::out_of_range);
}

TEST(OneHot, FeedForwardInputIsThreeTimesVocabulary) {
  const std::vector<std::size_t> triple{0, 5, 11};
  Tensor t = one_hot_concat(triple, 12);
  EXPECT_EQ(t.size(), 36u);
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[12 + 5], 1.0);
  EXPECT_EQ(t[24 + 11], 1.0);
  double s = 0;
  for (double v : t.values()) s += v;
  EXPECT_EQ(s, 3.0);
}

TEST(OneHot, BatchPicksPosition) {
  std::vector<std::vector<std::size_t>> seqs{{0, 1}, {2, 3}};
  Tensor t = one_hot_batch(seqs, 1, 4);
  EXPECT_EQ(t(0, 1), 1.0);
  EXPECT_EQ(t(1, 3), 1.0);
  EXPECT_EQ(t(0, 0), 0.0);
}

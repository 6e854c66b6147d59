#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace tumornet;
using testing_support::random_tensor;

TEST(Tensor, ShapeAndFill) {
  Tensor<double> t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, RowMajorIndexing) {
  Tensor<float> t({2, 3, 4});
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = static_cast<float>(k);
  EXPECT_EQ(t.at(1, 2, 3), 23.0f);
  EXPECT_EQ(t.at(0, 1, 0), 4.0f);
  EXPECT_THROW(t.at(2, 0, 0), ShapeError);
  EXPECT_THROW(t.at(0, 0), ShapeError);
}

TEST(Tensor, RejectsZeroExtentAndBadData) {
  EXPECT_THROW(Tensor<float>({2, 0}), ShapeError);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST(Tensor, DefaultIsEmpty) {
  Tensor<float> t;
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(t.rank(), 0u);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor<double> t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Tensor, CastAndFinite) {
  Tensor<double> t({2}, std::vector<double>{0.5, -2});
  auto f = t.cast<float>();
  EXPECT_EQ(f[1], -2.0f);
  EXPECT_TRUE(t.all_finite());
  t[0] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_THROW(require_finite(t, "test"), NumericError);
}

TEST(Matmul, HandComputed) {
  Tensor<double> a({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor<double> b({2, 1}, std::vector<double>{5, 6});
  auto c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_EQ(c[0], 17.0);
  EXPECT_EQ(c[1], 39.0);
}

TEST(Matmul, IdentityAndZeros) {
  auto b = random_tensor({3, 5}, 7);
  EXPECT_EQ(matmul(Tensor<double>::identity(3), b), b);
  auto z = matmul(random_tensor({4, 3}, 8), Tensor<double>::zeros({3, 2}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor<double>({2, 3}), Tensor<double>({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
  }
}

TEST(Matmul, TransposeIdentity) {
  auto a = random_tensor({3, 4}, 1), b = random_tensor({4, 2}, 2);
  auto lhs = transpose(matmul(a, b));
  auto rhs = matmul(transpose(b), transpose(a));
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, DifferentSeedsDiverge) {
  Rng a(1), b(2);
  bool differ = false;
  for (int i = 0; i < 10; ++i) differ |= a.next() != b.next();
  EXPECT_TRUE(differ);
}

TEST(Rng, UniformRange) {
  Rng r(99);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, KnownFirstOutputs) {
  // xoshiro256** seeded with splitmix64(0), as in the reference C code.
  Rng r(0);
  EXPECT_EQ(r.next(), 0x99EC5F36CB75F2B4ULL);
  EXPECT_EQ(r.next(), 0xBF6E1F784956452AULL);
}

TEST(Rng, BelowIsUnbiasedEnough) {
  Rng r(5);
  std::vector<int> hist(6, 0);
  for (int i = 0; i < 60000; ++i) ++hist[r.below(6)];
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(11);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  r.shuffle(std::span<int>(v));
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  bool moved = false;
  for (int i = 0; i < 50; ++i) moved |= v[i] != i;
  EXPECT_TRUE(moved);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t k = 0; k < 100; ++k) seen.insert(derive_seed(s, k));
  EXPECT_EQ(seen.size(), 400u);
}

TEST(Text, FormatAndParse) {
  EXPECT_EQ(text::format_double(0.1), "0.1");
  EXPECT_EQ(text::fixed(1.2578616, 3), "1.258");
  EXPECT_EQ(text::parse_double("2.5").value(), 2.5);
  EXPECT_FALSE(text::parse_double("2.5x").has_value());
  EXPECT_EQ(text::parse_uint("42").value(), 42u);
  EXPECT_FALSE(text::parse_uint("-1").has_value());
  EXPECT_EQ(text::parse_bool("true").value(), true);
  EXPECT_EQ(text::parse_bool("0").value(), false);
  EXPECT_EQ(text::trim("  a b \t"), "a b");
}

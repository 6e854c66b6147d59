#include <gtest/gtest.h>

#include <numbers>

#include "support.hpp"

using namespace tumornet;
using testing_support::random_tensor;

namespace {

Tensor<double> rows(std::size_t n, std::size_t c, std::vector<double> v) { return Tensor<double>({n, c}, std::move(v)); }

// Scalar Adamax written straight from the update equations, kept apart from
// the library implementation on purpose.
struct ScalarAdamax {
  double alpha = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-7;
  double m = 0, u = 0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    u = std::max(b2 * u, std::fabs(g));
    const double m_hat = m / (1 - std::pow(b1, t));
    return theta - alpha * m_hat / (u + eps);
  }
};

double scripted_gradient(int t) {
  return t % 17 == 0 ? 0.0 : std::sin(0.3 * t) * (1 + 0.5 * std::cos(1.1 * t));
}

} // namespace

// ----------------------------------------------------------------- loss

TEST(CrossEntropy, PerfectPredictionIsZero) {
  auto y = rows(2, 4, {1, 0, 0, 0, 0, 0, 1, 0});
  EXPECT_LE(categorical_cross_entropy(y, y), 1e-11);
}

TEST(CrossEntropy, UniformIsLogC) {
  for (std::size_t c : {2u, 4u, 7u})
    for (std::size_t n : {1u, 3u, 10u}) {
      Tensor<double> p({n, c}, 1.0 / static_cast<double>(c));
      Tensor<double> y({n, c});
      for (std::size_t i = 0; i < n; ++i) y.at(i, i % c) = 1;
      EXPECT_NEAR(categorical_cross_entropy(p, y), std::log(static_cast<double>(c)), 1e-9);
      EXPECT_NEAR(categorical_cross_entropy(p, y, LossReduction::Sum), static_cast<double>(n) * std::log(static_cast<double>(c)), 1e-9);
    }
  Tensor<double> p({1, 4}, 0.25);
  EXPECT_NEAR(categorical_cross_entropy(p, rows(1, 4, {0, 0, 1, 0})), 1.386294, 1e-6);
}

TEST(CrossEntropy, ScalarValue) {
  EXPECT_NEAR(categorical_cross_entropy(rows(1, 4, {0.7, 0.1, 0.1, 0.1}), rows(1, 4, {1, 0, 0, 0})), 0.356675, 1e-6);
}

TEST(CrossEntropy, ClampsZeroProbability) {
  const double l = categorical_cross_entropy(rows(1, 2, {0, 1}), rows(1, 2, {1, 0}));
  EXPECT_NEAR(l, -std::log(kLogFloor), 1e-9);
}

TEST(CrossEntropy, RejectsMalformedLabels) {
  Tensor<double> p({2, 3}, 1.0 / 3);
  EXPECT_THROW(categorical_cross_entropy(p, rows(2, 3, {1, 1, 0, 0, 0, 1})), NumericError);
  EXPECT_THROW(categorical_cross_entropy(p, rows(2, 3, {0.5, 0.5, 0, 0, 0, 1})), NumericError);
  EXPECT_THROW(categorical_cross_entropy(p, Tensor<double>({3, 3})), ShapeError);
}

TEST(CrossEntropy, NonNegativeAndMonotoneTowardTruth) {
  // p = (q, (1-q)/3, ...) with the true class first: loss falls as q grows.
  double prev = std::numeric_limits<double>::infinity();
  for (double q = 0.05; q < 1.0; q += 0.05) {
    const double r = (1 - q) / 3;
    const double l = categorical_cross_entropy(rows(1, 4, {q, r, r, r}), rows(1, 4, {1, 0, 0, 0}));
    EXPECT_GE(l, 0.0);
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(FusedGradient, EqualLogitsHandValue) {
  auto g = softmax_cross_entropy_gradient(rows(1, 4, {0, 0, 0, 0}), rows(1, 4, {1, 0, 0, 0}));
  const double expect[] = {-0.75, 0.25, 0.25, 0.25};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(g[i], expect[i], 1e-15);
}

TEST(FusedGradient, NearZeroWhenSoftmaxMatchesLabel) {
  auto g = softmax_cross_entropy_gradient(rows(1, 3, {60, 0, 0}), rows(1, 3, {1, 0, 0}));
  for (double v : g.data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(FusedGradient, RowsSumToZero) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto z = random_tensor({6, 4}, seed, -5, 5);
    Tensor<double> y({6, 4});
    for (std::size_t i = 0; i < 6; ++i) y.at(i, (i + seed) % 4) = 1;
    auto g = softmax_cross_entropy_gradient(z, y);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 4; ++j) s += g.at(i, j);
      EXPECT_NEAR(s, 0.0, 1e-6);
    }
  }
}

TEST(FusedGradient, MatchesFiniteDifferences) {
  for (auto red : {LossReduction::Mean, LossReduction::Sum}) {
    auto z = random_tensor({5, 4}, 3, -3, 3);
    Tensor<double> y({5, 4});
    for (std::size_t i = 0; i < 5; ++i) y.at(i, (2 * i) % 4) = 1;
    auto numeric = finite_difference_gradient<double>(
        [&](const std::vector<Tensor<double>>& p) { return categorical_cross_entropy(softmax(p[0]), y, red); }, {z});
    auto analytic = softmax_cross_entropy_gradient(z, y, red);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(analytic[i], numeric[0][i], 1e-6);
  }
}

// --------------------------------------------------------------- adamax

TEST(AdamaxHyper, DefaultsAndValidation) {
  AdamaxHyper h;
  EXPECT_EQ(h.alpha, 0.001);
  EXPECT_EQ(h.beta1, 0.9);
  EXPECT_EQ(h.beta2, 0.999);
  EXPECT_EQ(h.epsilon, 1e-7);
  EXPECT_NO_THROW(h.validate());
  auto bad = [](auto mutate, const char* key) {
    AdamaxHyper x;
    mutate(x);
    try {
      x.validate();
      ADD_FAILURE() << "accepted invalid " << key;
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.key(), key);
    }
  };
  bad([](AdamaxHyper& x) { x.alpha = 0; }, "optimizer.alpha");
  bad([](AdamaxHyper& x) { x.beta1 = 1; }, "optimizer.beta1");
  bad([](AdamaxHyper& x) { x.beta2 = -0.1; }, "optimizer.beta2");
  bad([](AdamaxHyper& x) { x.epsilon = 0; }, "optimizer.epsilon");
}

TEST(Adamax, ZeroGradientLeavesParameters) {
  std::vector<Tensor<double>> p{random_tensor({3, 2}, 1)};
  const auto before = p;
  AdamaxState<double> st;
  adamax_step(p, {Tensor<double>({3, 2})}, st, {});
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adamax, FirstStepMovesByAlpha) {
  Rng rng(2024);
  std::vector<Tensor<double>> p{Tensor<double>({1000})};
  Tensor<double> g({1000});
  for (auto& v : g.data()) v = (rng.bernoulli(0.5) ? 1 : -1) * rng.uniform(0.5, 5.0);
  for (std::size_t k = 0; k < 1000; ++k) p[0][k] = rng.uniform(-1, 1);
  const auto before = p;
  AdamaxState<double> st;
  adamax_step(p, {g}, st, {});
  for (std::size_t k = 0; k < 1000; ++k) {
    const double delta = p[0][k] - before[0][k];
    EXPECT_NEAR(std::abs(delta), 0.001, 1e-9);
    EXPECT_EQ(std::signbit(delta), !std::signbit(g[k]));
  }
}

TEST(Adamax, MatchesScalarOracle) {
  ScalarAdamax oracle;
  std::vector<Tensor<double>> p{Tensor<double>({1}, 0.5)};
  AdamaxState<double> st;
  double theta = 0.5;
  for (int t = 1; t <= 100; ++t) {
    const double g = scripted_gradient(t);
    theta = oracle.step(theta, g);
    adamax_step(p, {Tensor<double>({1}, g)}, st, {});
    ASSERT_NEAR(p[0][0], theta, 1e-12) << "step " << t;
  }
}

TEST(Adamax, MatchesFrozenTrajectory) {
  // oracles/reference.py, adamax_trajectory()
  const std::map<int, double> ref{{1, 0.4990000002758288}, {2, 0.4980427365131604}, {10, 0.49321509092167265},
                                  {50, 0.49127613327494096}, {100, 0.49209408508604635}};
  std::vector<Tensor<double>> p{Tensor<double>({1}, 0.5)};
  AdamaxState<double> st;
  for (int t = 1; t <= 100; ++t) {
    adamax_step(p, {Tensor<double>({1}, scripted_gradient(t))}, st, {});
    if (auto it = ref.find(t); it != ref.end()) {
      EXPECT_NEAR(p[0][0], it->second, 1e-12) << "step " << t;
    }
  }
}

TEST(Adamax, LiteralVariantUsesCurrentMaxNorm) {
  AdamaxHyper h;
  h.variant = AdamaxVariant::Literal;
  std::vector<Tensor<double>> p{Tensor<double>({2}, std::vector<double>{0, 0})};
  AdamaxState<double> st;
  adamax_step(p, {Tensor<double>({2}, std::vector<double>{2, -0.5})}, st, h);
  // m = 0.1 g, u = max|g| = 2, no bias correction
  EXPECT_NEAR(p[0][0], -0.001 * 0.2 / (2 + 1e-7), 1e-15);
  EXPECT_NEAR(p[0][1], 0.001 * 0.05 / (2 + 1e-7), 1e-15);
  EXPECT_EQ(st.u[0][1], 2.0);

  std::vector<Tensor<double>> q{Tensor<double>({1}, 0.5)};
  AdamaxState<double> sq;
  for (int t = 1; t <= 100; ++t) adamax_step(q, {Tensor<double>({1}, scripted_gradient(t))}, sq, h);
  EXPECT_NEAR(q[0][0], -1339.4318066701258, 1e-7);
}

TEST(Adamax, DeterministicTrajectories) {
  auto run = [] {
    std::vector<Tensor<float>> p{random_tensor<float>({4, 4}, 1), random_tensor<float>({4}, 2)};
    AdamaxState<float> st;
    for (std::uint64_t t = 0; t < 30; ++t)
      adamax_step(p, {random_tensor<float>({4, 4}, 100 + t), random_tensor<float>({4}, 200 + t)}, st, {});
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adamax, RejectsBadInput) {
  std::vector<Tensor<double>> p{Tensor<double>({2})};
  AdamaxState<double> st;
  EXPECT_THROW(adamax_step(p, {Tensor<double>({3})}, st, {}), ShapeError);
  EXPECT_THROW(adamax_step(p, {}, st, {}), ShapeError);
  Tensor<double> g({2});
  g[1] = std::numeric_limits<double>::infinity();
  const auto before = p;
  EXPECT_THROW(adamax_step(p, {g}, st, {}), NumericError);
  EXPECT_EQ(p, before);
}

// ------------------------------------------------------------ gradcheck

TEST(FiniteDifference, Quadratic) {
  auto g = finite_difference_gradient<double>(
      [](const std::vector<Tensor<double>>& p) { return p[0][0] * p[0][0] + p[0][1] * p[0][1]; },
      {Tensor<double>({2}, std::vector<double>{1, 2})});
  EXPECT_NEAR(g[0][0], 2.0, 1e-8);
  EXPECT_NEAR(g[0][1], 4.0, 1e-8);
}

TEST(FiniteDifference, ConstantAndLinear) {
  auto c = finite_difference_gradient<double>([](const std::vector<Tensor<double>>&) { return 7.0; },
                                              {random_tensor({3}, 1)});
  for (double v : c[0].data()) EXPECT_EQ(v, 0.0);
  auto l = finite_difference_gradient<double>(
      [](const std::vector<Tensor<double>>& p) { return 3.0 * p[0][0]; }, {Tensor<double>({1}, 0.25)});
  EXPECT_NEAR(l[0][0], 3.0, 1e-10);
}

TEST(FiniteDifference, PerturbsOneCoordinateAtATime) {
  auto p = random_tensor({4}, 2);
  std::size_t calls = 0;
  finite_difference_gradient<double>(
      [&](const std::vector<Tensor<double>>& q) {
        ++calls;
        std::size_t moved = 0;
        for (std::size_t k = 0; k < 4; ++k)
          if (q[0][k] != p[k]) {
            ++moved;
            EXPECT_NEAR(std::abs(q[0][k] - p[k]), 1e-5, 1e-15);
          }
        EXPECT_EQ(moved, 1u);
        return q[0][0];
      },
      {p});
  EXPECT_EQ(calls, 8u);
}

TEST(FiniteDifference, RejectsNonFiniteLoss) {
  EXPECT_THROW(finite_difference_gradient<double>(
                   [](const std::vector<Tensor<double>>& q) { return std::log(q[0][0]); },
                   {Tensor<double>({1}, 0.0)}),
               NumericError);
}

TEST(GradientComparison, ReportsWorstCoordinate) {
  std::vector<Tensor<double>> a{Tensor<double>({2}, std::vector<double>{1, 2}), Tensor<double>({3}, 1.0)};
  auto b = a;
  b[1][2] = 1.1;
  const auto c = compare_gradients(a, b);
  EXPECT_EQ(c.worst_tensor, 1u);
  EXPECT_EQ(c.worst_element, 2u);
  EXPECT_EQ(c.coordinates, 5u);
  EXPECT_NEAR(c.max_relative_error, 0.1 / 1.1, 1e-12);
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
}

TEST(CrossEntropy, RowLossesSumToTheBatchLoss) {
  const auto logits = testing_support::random_tensor<double>({7, 4}, 12, -3, 3);
  const auto p = softmax(logits);
  Tensor<double> y({7, 4});
  for (std::size_t i = 0; i < 7; ++i) y[i * 4 + (i * 3) % 4] = 1;
  const auto rows = cross_entropy_rows(p, y);
  ASSERT_EQ(rows.size(), 7u);
  double sum = 0;
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_DOUBLE_EQ(rows[i], -std::log(p[i * 4 + (i * 3) % 4]));
    sum += rows[i];
  }
  EXPECT_EQ(sum, categorical_cross_entropy(p, y, LossReduction::Sum));
  EXPECT_THROW(cross_entropy_rows(p, Tensor<double>({7, 3})), ShapeError);
}

#include <gtest/gtest.h>

#include "support.hpp"

using namespace tumornet;
using testing_support::probe;
using testing_support::random_tensor;
using testing_support::wave;

namespace {

struct ConvReference {
  const char* name;
  Shape input, kernels;
  ConvGeometry geom;
  Shape out_shape;
  // {sum, cosine-weighted sum} from oracles/reference.py
  double out[2], grad_input[2], grad_kernels[2], grad_bias[2];
};

const ConvReference kConvCases[] = {
    {"same_s1", {2, 5, 5, 2}, {3, 3, 2, 3}, {3, 3, 1, Padding::Same}, {2, 5, 5, 3},
     {9.714917341361197, -0.04070466305278886}, {-0.3517046289662553, 3.6332745126461248},
     {3.496862664182225, 0.5376420112166576}, {3.0989047611477494, 2.227547087168692}},
    {"valid_s1", {2, 5, 5, 2}, {3, 3, 2, 3}, {3, 3, 1, Padding::Valid}, {2, 3, 3, 3},
     {6.7520245979083935, 0.6797243413016569}, {0.47220523151433147, -0.18168723595200387},
     {-10.98976959622425, -1.2143075084785493}, {3.739385393330925, 2.4965537115738763}},
    {"same_s2_odd_pad", {1, 6, 6, 2}, {3, 3, 2, 3}, {3, 3, 2, Padding::Same}, {1, 3, 3, 3},
     {2.051152557454497, 0.24410785245457992}, {0.3314333498901785, 3.8262934970419002},
     {3.344538042839157, 0.7472132189725715}, {2.110487444548334, 1.06258477366844}},
    {"valid_s2_rect", {1, 7, 6, 3}, {2, 3, 3, 2}, {2, 3, 2, Padding::Valid}, {1, 3, 2, 2},
     {0.8803326528210542, 0.1510162864228227}, {0.004821875463077108, -0.05376145851348657},
     {19.803604856859245, 0.36200894209602374}, {-0.0038982271833239435, -0.008116307718552079}},
};

} // namespace

TEST(Conv2d, OutputShapeSameAndValid) {
  EXPECT_EQ(conv2d_output_shape({1, 224, 224, 3}, {3, 3, 3, 32}, {}), (Shape{1, 224, 224, 32}));
  EXPECT_EQ(conv2d_output_shape({1, 7, 7, 1}, {3, 3, 1, 1}, {3, 3, 2, Padding::Same}), (Shape{1, 4, 4, 1}));
  EXPECT_EQ(conv2d_output_shape({1, 7, 7, 1}, {3, 3, 1, 1}, {3, 3, 2, Padding::Valid}), (Shape{1, 3, 3, 1}));
  EXPECT_THROW(conv2d_output_shape({1, 2, 2, 1}, {3, 3, 1, 1}, {3, 3, 1, Padding::Valid}), ShapeError);
  EXPECT_THROW(conv2d_output_shape({1, 5, 5, 2}, {3, 3, 3, 1}, {}), ShapeError);
}

TEST(Conv2d, IdentityKernel) {
  auto x = random_tensor({2, 4, 5, 1}, 3);
  Tensor<double> k({1, 1, 1, 1}, 1.0), b({1});
  EXPECT_EQ(conv2d_forward(x, k, b, {1, 1, 1, Padding::Same}), x);
}

TEST(Conv2d, ZeroKernelGivesZero) {
  auto x = random_tensor({1, 5, 5, 2}, 4);
  auto y = conv2d_forward(x, Tensor<double>({3, 3, 2, 4}), Tensor<double>({4}), {});
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, HandSummedWindows) {
  Tensor<double> x({1, 3, 3, 1}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> k({2, 2, 1, 1}, 1.0);
  auto y = conv2d_forward(x, k, Tensor<double>({1}), {2, 2, 1, Padding::Valid});
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2, 1}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{12, 16, 24, 28}));
}

TEST(Conv2d, SamePaddingPutsExtraPixelBottomRight) {
  // 4x4 input, 2x2 kernel, stride 1: one pad row/col, all of it at the bottom/right.
  Tensor<double> x({1, 4, 4, 1}, 1.0);
  auto y = conv2d_forward(x, Tensor<double>({2, 2, 1, 1}, 1.0), Tensor<double>({1}), {2, 2, 1, Padding::Same});
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 3, 0, 0), 2.0);
  EXPECT_EQ(y.at(0, 3, 3, 0), 1.0);
}

TEST(Conv2d, MatchesTorchReference) {
  for (const auto& c : kConvCases) {
    SCOPED_TRACE(c.name);
    auto x = wave(c.input, 1.0, 0.37, 0.1);
    auto k = wave(c.kernels, 0.5, 0.91, 0.4);
    auto b = wave({c.kernels[3]}, 0.2, 1.7, 0.0);
    auto y = conv2d_forward(x, k, b, c.geom);
    ASSERT_EQ(y.shape(), c.out_shape);
    auto g = wave(y.shape(), 1.0, 0.53, 0.2);
    auto grads = conv2d_backward(g, x, k, c.geom);
    auto check = [](const Tensor<double>& t, const double (&ref)[2]) {
      const auto p = probe(t);
      EXPECT_NEAR(p.sum, ref[0], 1e-10);
      EXPECT_NEAR(p.weighted, ref[1], 1e-10);
    };
    check(y, c.out);
    check(grads.input, c.grad_input);
    check(grads.kernels, c.grad_kernels);
    check(grads.bias, c.grad_bias);
  }
}

TEST(Conv2d, BackwardZeroUpstream) {
  auto x = random_tensor({1, 4, 4, 2}, 1);
  auto k = random_tensor({3, 3, 2, 3}, 2);
  auto g = conv2d_backward(Tensor<double>({1, 4, 4, 3}), x, k, {});
  for (const auto* t : {&g.input, &g.kernels, &g.bias})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, IdentityKernelAdjoint) {
  auto x = random_tensor({1, 3, 3, 1}, 1);
  auto go = random_tensor({1, 3, 3, 1}, 2);
  auto g = conv2d_backward(go, x, Tensor<double>({1, 1, 1, 1}, 1.0), {1, 1, 1, Padding::Same});
  EXPECT_EQ(g.input, go);
}

class ConvFiniteDifference : public ::testing::TestWithParam<ConvGeometry> {};

TEST_P(ConvFiniteDifference, BackwardMatchesCentralDifferences) {
  const ConvGeometry geom = GetParam();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto x = random_tensor({2, 6, 5, 2}, seed);
    auto k = random_tensor({geom.kernel_height, geom.kernel_width, 2, 3}, seed + 10);
    auto b = random_tensor({3}, seed + 20);
    const auto out_shape = conv2d_output_shape(x.shape(), k.shape(), geom);
    auto w = random_tensor(out_shape, seed + 30);
    auto loss = [&](const std::vector<Tensor<double>>& p) {
      auto y = conv2d_forward(p[0], p[1], p[2], geom);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
      return s;
    };
    auto numeric = finite_difference_gradient<double>(loss, {x, k, b});
    auto g = conv2d_backward(w, x, k, geom);
    auto cmp = compare_gradients<double>({g.input, g.kernels, g.bias}, numeric);
    EXPECT_LT(cmp.max_relative_error, 1e-4) << "tensor " << cmp.worst_tensor << " element " << cmp.worst_element;
  }
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvFiniteDifference,
                         ::testing::Values(ConvGeometry{3, 3, 1, Padding::Same}, ConvGeometry{3, 3, 1, Padding::Valid},
                                           ConvGeometry{3, 3, 2, Padding::Same}, ConvGeometry{2, 2, 2, Padding::Valid},
                                           ConvGeometry{2, 3, 1, Padding::Same}),
                         [](const auto& info) {
                           const auto& g = info.param;
                           return std::string(g.padding == Padding::Same ? "same" : "valid") + "_k" +
                                  std::to_string(g.kernel_height) + "x" + std::to_string(g.kernel_width) + "_s" +
                                  std::to_string(g.stride);
                         });

TEST(Conv2d, LinearInInputAndKernels) {
  auto x = random_tensor({2, 5, 5, 3}, 5);
  auto k = random_tensor({3, 3, 3, 4}, 6);
  Tensor<double> b({4});
  const double a = 2.75;
  auto base = conv2d_forward(x, k, b, {});
  Tensor<double> xs = x, ks = k;
  for (auto& v : xs.data()) v *= a;
  for (auto& v : ks.data()) v *= a;
  auto by_x = conv2d_forward(xs, k, b, {});
  auto by_k = conv2d_forward(x, ks, b, {});
  for (std::size_t i = 0; i < base.size(); ++i) {
    EXPECT_NEAR(by_x[i], a * base[i], 1e-6);
    EXPECT_NEAR(by_k[i], a * base[i], 1e-6);
  }
}

TEST(Conv2d, Deterministic) {
  auto x = random_tensor<float>({2, 8, 8, 3}, 1);
  auto k = random_tensor<float>({3, 3, 3, 5}, 2);
  auto b = random_tensor<float>({5}, 3);
  EXPECT_EQ(conv2d_forward(x, k, b, {}), conv2d_forward(x, k, b, {}));
  auto g = random_tensor<float>({2, 8, 8, 5}, 4);
  auto g1 = conv2d_backward(g, x, k, {}), g2 = conv2d_backward(g, x, k, {});
  EXPECT_EQ(g1.input, g2.input);
  EXPECT_EQ(g1.kernels, g2.kernels);
}

TEST(MaxPool, HandMax) {
  Tensor<double> x({1, 2, 2, 1}, std::vector<double>{1, 2, 3, 4});
  auto r = maxpool2d_forward(x, {2, 2}, 2);
  EXPECT_EQ(r.output.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.index.argmax, (std::vector<std::size_t>{3}));
}

TEST(MaxPool, ConstantInputPicksFirstInWindow) {
  Tensor<double> x({1, 4, 4, 2}, 3.0);
  auto r = maxpool2d_forward(x, {2, 2}, 2);
  for (double v : r.output.data()) EXPECT_EQ(v, 3.0);
  // output (oy, ox, c) -> input (2oy, 2ox, c)
  for (std::size_t oy = 0; oy < 2; ++oy)
    for (std::size_t ox = 0; ox < 2; ++ox)
      for (std::size_t c = 0; c < 2; ++c)
        EXPECT_EQ(r.index.argmax[(oy * 2 + ox) * 2 + c], ((2 * oy) * 4 + 2 * ox) * 2 + c);
}

TEST(MaxPool, IncreasingRasterPicksBottomRight) {
  Tensor<double> x({1, 4, 6, 1});
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = static_cast<double>(k);
  auto r = maxpool2d_forward(x, {2, 2}, 2);
  ASSERT_EQ(r.output.shape(), (Shape{1, 2, 3, 1}));
  for (std::size_t oy = 0; oy < 2; ++oy)
    for (std::size_t ox = 0; ox < 3; ++ox) EXPECT_EQ(r.output.at(0, oy, ox, 0), (2 * oy + 1) * 6.0 + 2 * ox + 1);
}

TEST(MaxPool, OddExtentDropsRemainder) {
  EXPECT_EQ(maxpool2d_output_shape({1, 5, 7, 3}, {2, 2}, 2), (Shape{1, 2, 3, 3}));
  EXPECT_THROW(maxpool2d_output_shape({1, 1, 4, 1}, {2, 2}, 2), ShapeError);
}

TEST(MaxPool, BackwardRoutesToArgmax) {
  Tensor<double> x({1, 2, 2, 1}, std::vector<double>{1, 7, 3, 4});
  auto r = maxpool2d_forward(x, {2, 2}, 2);
  auto g = maxpool2d_backward(Tensor<double>({1, 1, 1, 1}, 5.0), r.index, x.shape());
  EXPECT_EQ(std::vector<double>(g.data().begin(), g.data().end()), (std::vector<double>{0, 5, 0, 0}));
  auto z = maxpool2d_backward(Tensor<double>({1, 1, 1, 1}), r.index, x.shape());
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(MaxPool, BackwardRejectsForeignIndex) {
  auto r = maxpool2d_forward(random_tensor({1, 4, 4, 1}, 1), {2, 2}, 2);
  EXPECT_THROW(maxpool2d_backward(Tensor<double>({1, 2, 2, 1}), r.index, Shape{1, 6, 6, 1}), ShapeError);
}

TEST(MaxPool, BackwardConservesMass) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto x = random_tensor({2, 6, 6, 3}, seed);
    auto r = maxpool2d_forward(x, {2, 2}, 2);
    auto go = random_tensor(r.output.shape(), seed + 100);
    auto gi = maxpool2d_backward(go, r.index, x.shape());
    double a = 0, b = 0;
    for (double v : go.data()) a += v;
    for (double v : gi.data()) b += v;
    EXPECT_NEAR(a, b, 1e-12);
  }
}

TEST(MaxPool, BackwardMatchesCentralDifferences) {
  for (std::size_t stride : {1, 2, 3}) {
    // Spread values far apart so a 1e-5 nudge never changes a window's winner.
    auto x = random_tensor({1, 6, 6, 2}, stride);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += static_cast<double>((k * 37) % x.size());
    auto r = maxpool2d_forward(x, {2, 2}, stride);
    auto w = random_tensor(r.output.shape(), 50 + stride);
    auto loss = [&](const std::vector<Tensor<double>>& p) {
      auto y = maxpool2d_forward(p[0], {2, 2}, stride).output;
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * w[i];
      return s;
    };
    auto numeric = finite_difference_gradient<double>(loss, {x});
    auto analytic = maxpool2d_backward(w, r.index, x.shape());
    EXPECT_LT(compare_gradients<double>({analytic}, numeric).max_relative_error, 1e-4) << "stride " << stride;
  }
}

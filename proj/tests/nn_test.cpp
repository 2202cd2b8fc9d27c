// Copyright 2026 The Pathforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pathforge/nn/gradcheck.hpp"
#include "pathforge/nn/ops.hpp"
#include "pathforge/nn/optim.hpp"

namespace pathforge::nn {
namespace {

template <class T = float>
Tensor<T> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(std::move(s));
  for (auto& x : t.data) x = static_cast<T>(u(rng));
  return t;
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  EXPECT_EQ(a.shape, b.shape);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  return m;
}

TEST(Conv, HalvesSpatialDims) {
  Tensor<float> x({1, 5, 64, 64});
  Tensor<float> w({8, 5, 4, 4}), b({8});
  EXPECT_EQ(conv_forward(x, w, b).shape, (Shape{1, 8, 32, 32}));
}

TEST(Conv, ZeroWeightsGiveBias) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({2, 3, 8, 8}, rng);
  Tensor<float> w({4, 3, 4, 4});
  Tensor<float> b({4});
  b.data = {0.5f, -1.0f, 2.0f, 0.0f};
  auto y = conv_forward(x, w, b);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 4; ++c)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(y.at(n, c, i, j), b.data[c]);
}

TEST(Conv, MatchesNaiveLoops) {
  std::mt19937_64 rng(2);
  {
    auto x = random_tensor({1, 1, 6, 6}, rng);
    auto w = random_tensor({1, 1, 4, 4}, rng);
    auto b = random_tensor({1}, rng);
    EXPECT_LT(max_abs_diff(conv_forward(x, w, b), conv_forward_naive(x, w, b)), 1e-5);
  }
  auto x = random_tensor({3, 4, 10, 8}, rng);
  auto w = random_tensor({5, 4, 4, 4}, rng);
  auto b = random_tensor({5}, rng);
  EXPECT_LT(max_abs_diff(conv_forward(x, w, b), conv_forward_naive(x, w, b)), 1e-5);
}

TEST(Conv, RejectsBadShapes) {
  Tensor<float> w({8, 5, 4, 4}), b({8});
  EXPECT_THROW(conv_forward(Tensor<float>({1, 4, 8, 8}), w, b), ShapeMismatch);
  EXPECT_THROW(conv_forward(Tensor<float>({1, 5, 7, 8}), w, b), ShapeMismatch);
  EXPECT_THROW(conv_forward(Tensor<float>({1, 5, 8, 8}), w, Tensor<float>({7})), ShapeMismatch);
  EXPECT_THROW(conv_forward(Tensor<float>({5, 8, 8}), w, b), ShapeMismatch);
}

TEST(Deconv, DoublesSpatialDims) {
  Tensor<float> x({1, 256, 1, 1});
  Tensor<float> w({256, 7, 4, 4}), b({7});
  EXPECT_EQ(deconv_forward(x, w, b).shape, (Shape{1, 7, 2, 2}));
}

TEST(Deconv, ZeroInputGivesBias) {
  Tensor<float> x({2, 3, 4, 4});
  std::mt19937_64 rng(3);
  auto w = random_tensor({3, 2, 4, 4}, rng);
  Tensor<float> b({2});
  b.data = {0.25f, -3.0f};
  auto y = deconv_forward(x, w, b);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) EXPECT_EQ(y.at(n, c, i, j), b.data[c]);
}

TEST(Deconv, MatchesNaiveLoops) {
  std::mt19937_64 rng(4);
  auto x = random_tensor({2, 3, 5, 4}, rng);
  auto w = random_tensor({3, 6, 4, 4}, rng);
  auto b = random_tensor({6}, rng);
  EXPECT_LT(max_abs_diff(deconv_forward(x, w, b), deconv_forward_naive(x, w, b)), 1e-5);
}

// <conv(x), g> = <x, deconv(g)> with shared W, zero bias; and deconv(g) equals
// the input gradient of conv.
TEST(Deconv, IsAdjointOfConv) {
  std::mt19937_64 rng(5);
  auto x = random_tensor<double>({1, 2, 4, 4}, rng);
  auto w = random_tensor<double>({3, 2, 4, 4}, rng);
  auto g = random_tensor<double>({1, 3, 2, 2}, rng);
  Tensor<double> zero_out({3}), zero_in({2});
  auto y = conv_forward_naive(x, w, zero_out);
  auto xt = deconv_forward_naive(g, w, zero_in);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y.data[i] * g.data[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data[i] * xt.data[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);

  Tensor<double> dx(x.shape), dw(w.shape), db({3});
  conv_backward(x, w, g, &dx, dw, db);
  EXPECT_LT(max_abs_diff(dx, deconv_forward(g, w, zero_in)), 1e-12);
}

TEST(ShapeLaws, ConvHalvesDeconvDoubles) {
  std::mt19937_64 rng(6);
  auto w = random_tensor({2, 1, 4, 4}, rng);
  auto wt = random_tensor({1, 2, 4, 4}, rng);
  Tensor<float> b({2});
  for (int h = 4; h <= 128; h += 2)
    for (int wd : {4, h}) {
      Tensor<float> x({1, 1, h, wd});
      auto y = conv_forward(x, w, b);
      ASSERT_EQ(y.shape, (Shape{1, 2, h / 2, wd / 2}));
      ASSERT_EQ(deconv_forward(x, wt, b).shape, (Shape{1, 2, 2 * h, 2 * wd}));
    }
}

TEST(Relu, AllNegativeInputGetsZeroGrad) {
  Graph<double> g;
  Tensor<double> x({1, 2, 3, 3}, -0.5);
  const int xi = g.leaf(x);
  Tensor<double> c({1, 2, 3, 3}, 1.0);
  g.backward(g.dot(g.relu(xi), c));
  for (double v : g.grad(xi).data) EXPECT_EQ(v, 0.0);
}

TEST(Sigmoid, StrictlyInsideUnitInterval) {
  for (float z : {-1000.0f, -90.0f, -20.0f, 0.0f, 20.0f, 90.0f, 1000.0f}) {
    const float y = sigmoid(z);
    EXPECT_GT(y, 0.0f) << z;
    EXPECT_LT(y, 1.0f) << z;
  }
  EXPECT_FLOAT_EQ(sigmoid(0.0f), 0.5f);
}

TEST(Gradients, ConvDeconvFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 1 + trial % 2, cin = 1 + trial, cout = 3 - trial % 2, h = 2 + 2 * trial;
    auto c1 = random_tensor<double>({n, cout, h / 2, h / 2}, rng);
    double e = gradcheck({random_tensor<double>({n, cin, h, h}, rng),
                          random_tensor<double>({cout, cin, 4, 4}, rng),
                          random_tensor<double>({cout}, rng)},
                         [&](Graph<double>& g, const std::vector<int>& in) {
                           return g.dot(g.conv(in[0], in[1], in[2]), c1);
                         });
    EXPECT_LT(e, 1e-4) << "conv trial " << trial;
    auto c2 = random_tensor<double>({n, cout, 2 * h, 2 * h}, rng);
    e = gradcheck({random_tensor<double>({n, cin, h, h}, rng),
                   random_tensor<double>({cin, cout, 4, 4}, rng),
                   random_tensor<double>({cout}, rng)},
                  [&](Graph<double>& g, const std::vector<int>& in) {
                    return g.dot(g.deconv(in[0], in[1], in[2]), c2);
                  });
    EXPECT_LT(e, 1e-4) << "deconv trial " << trial;
  }
}

TEST(Gradients, ActivationsAndLoss) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 4; ++trial) {
    const Shape s{1 + trial % 2, 2, 3 + trial, 4};
    auto c = random_tensor<double>(s, rng);
    // Keep ReLU inputs away from the kink.
    auto x = random_tensor<double>(s, rng, 0.05, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x.data[i] = -x.data[i];
    EXPECT_LT(gradcheck({x}, [&](Graph<double>& g, const std::vector<int>& in) {
                return g.dot(g.relu(in[0]), c);
              }),
              1e-4);
    EXPECT_LT(gradcheck({random_tensor<double>(s, rng, -4, 4)},
                        [&](Graph<double>& g, const std::vector<int>& in) {
                          return g.dot(g.sigmoid(in[0]), c);
                        }),
              1e-4);
    auto t = random_tensor<double>(s, rng, 0, 1);
    for (auto& v : t.data) v = v > 0.5 ? 1.0 : 0.0;
    EXPECT_LT(gradcheck({random_tensor<double>(s, rng, 0.05, 0.95)},
                        [&](Graph<double>& g, const std::vector<int>& in) {
                          return g.bce(in[0], t);
                        }),
              1e-4);
  }
}

TEST(Gradients, TwoLayerNetAllParameters) {
  std::mt19937_64 rng(9);
  auto x = random_tensor<double>({2, 3, 8, 8}, rng);
  auto t = random_tensor<double>({2, 2, 8, 8}, rng, 0, 1);
  for (auto& v : t.data) v = v > 0.5;
  double e = gradcheck({random_tensor<double>({4, 3, 4, 4}, rng), random_tensor<double>({4}, rng),
                        random_tensor<double>({4, 2, 4, 4}, rng), random_tensor<double>({2}, rng)},
                       [&](Graph<double>& g, const std::vector<int>& p) {
                         const int xi = g.input(x);
                         const int h = g.relu(g.conv(xi, p[0], p[1]));
                         return g.bce(g.sigmoid(g.deconv(h, p[2], p[3])), t);
                       });
  EXPECT_LT(e, 1e-4);
}

// x feeds two conv branches whose outputs are concatenated.
TEST(Gradients, FanOutSumsBranches) {
  std::mt19937_64 rng(10);
  auto w1 = random_tensor<double>({2, 2, 4, 4}, rng);
  auto w2 = random_tensor<double>({3, 2, 4, 4}, rng);
  Tensor<double> b1({2}), b2({3});
  auto c = random_tensor<double>({1, 5, 3, 3}, rng);
  auto x = random_tensor<double>({1, 2, 6, 6}, rng);
  auto build = [&](Graph<double>& g, const std::vector<int>& in) {
    const int a = g.conv(in[0], g.input(w1), g.input(b1));
    const int b = g.conv(in[0], g.input(w2), g.input(b2));
    return g.dot(g.concat({a, b}), c);
  };
  EXPECT_LT(gradcheck({x}, build), 1e-4);

  // Analytic: sum of the two branch input gradients computed separately.
  Tensor<double> c1({1, 2, 3, 3}), c2({1, 3, 3, 3});
  std::copy_n(c.data.begin(), 18, c1.data.begin());
  std::copy_n(c.data.begin() + 18, 27, c2.data.begin());
  Tensor<double> dx(x.shape), dw1(w1.shape), db1({2}), dw2(w2.shape), db2({3});
  conv_backward(x, w1, c1, &dx, dw1, db1);
  conv_backward(x, w2, c2, &dx, dw2, db2);
  Graph<double> g;
  const int xi = g.leaf(x);
  g.backward(build(g, {xi}));
  EXPECT_LT(max_abs_diff(g.grad(xi), dx), 1e-12);
}

TEST(Graph, BackwardWithoutRecordingThrows) {
  Graph<float> g(false);
  const int x = g.leaf(Tensor<float>({1}, 1.0f));
  EXPECT_THROW(g.backward(x), GraphNotRecorded);
  Graph<float> h;
  EXPECT_THROW(h.backward(0), GraphNotRecorded);
}

TEST(Graph, ParameterGradientsAccumulate) {
  Parameter<double> p("w", Tensor<double>({1}, 2.0));
  for (int i = 0; i < 2; ++i) {
    Graph<double> g;
    const int w = g.param(p);
    g.backward(g.weighted_sum({{w, 3.0}}));
  }
  EXPECT_DOUBLE_EQ(p.grad.data[0], 6.0);
}

TEST(PixelBce, HalfEverywhereIsLn2) {
  std::mt19937_64 rng(11);
  Tensor<float> p({1, 1, 8, 8}, 0.5f);
  auto t = random_tensor(Shape{1, 1, 8, 8}, rng, 0, 1);
  for (auto& v : t.data) v = v > 0.5f;
  EXPECT_NEAR(pixel_bce(p, t), std::log(2.0), 1e-6);
}

TEST(PixelBce, PerfectPredictionNearZero) {
  Tensor<float> t({1, 1, 4, 4});
  for (std::size_t i = 0; i < t.size(); i += 3) t.data[i] = 1.0f;
  const float loss = pixel_bce(t, t);
  EXPECT_GE(loss, 0.0f);
  EXPECT_LE(loss, -std::log(1.0 - kBceEps) * 1.001);
}

TEST(PixelBce, MatchesScalarLoop) {
  std::mt19937_64 rng(12);
  auto p = random_tensor<double>({1, 1, 8, 8}, rng, 0.0, 1.0);
  auto t = random_tensor<double>({1, 1, 8, 8}, rng, 0.0, 1.0);
  for (auto& v : t.data) v = v > 0.5;
  double ref = 0.0;
  for (int i = 0; i < 64; ++i) {
    const double q = std::min(std::max(p.data[i], 1e-6), 1 - 1e-6);
    ref += t.data[i] > 0.5 ? -std::log(q) : -std::log(1 - q);
  }
  Tensor<double> grad;
  EXPECT_NEAR(pixel_bce(p, t, &grad), ref / 64, 1e-6);
  for (int i = 0; i < 64; ++i) {
    const double q = p.data[i];
    EXPECT_NEAR(grad.data[i], (q - t.data[i]) / (q * (1 - q)) / 64, 1e-9);
  }
}

TEST(PixelBce, ShapeMismatch) {
  EXPECT_THROW(pixel_bce(Tensor<float>({1, 1, 4, 4}), Tensor<float>({1, 1, 4, 2})), ShapeMismatch);
}

TEST(PixelBce, NeverNegative) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 50; ++i) {
    auto p = random_tensor(Shape{1, 1, 4, 4}, rng, 0, 1);
    auto t = random_tensor(Shape{1, 1, 4, 4}, rng, 0, 1);
    for (auto& v : t.data) v = v > 0.5f;
    EXPECT_GE(pixel_bce(p, t), 0.0f);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Parameter<float> p("w", Tensor<float>({3}, 1.5f));
  Adam<float> opt;
  opt.step({&p});
  for (float v : p.value.data) EXPECT_EQ(v, 1.5f);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter<double> p("w", Tensor<double>({4}, 0.0));
  p.grad.data = {0.3, -2.0, 10.0, 1e-3};
  Adam<double> opt;
  opt.step({&p});
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(std::abs(p.value.data[i]), 1e-3, 1e-7);
    EXPECT_LT(p.value.data[i] * p.grad.data[i], 0.0);
  }
}

TEST(Adam, Deterministic) {
  auto run = [] {
    std::mt19937_64 rng(14);
    Parameter<float> p("w", random_tensor(Shape{16}, rng));
    Adam<float> opt;
    for (int s = 0; s < 10; ++s) {
      p.grad = random_tensor(Shape{16}, rng);
      opt.step({&p});
    }
    return p.value;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ShapeChangeThrows) {
  Parameter<float> p("w", Tensor<float>({3}));
  Adam<float> opt;
  opt.step({&p});
  Parameter<float> q("w", Tensor<float>({4}));
  EXPECT_THROW(opt.step({&q}), ShapeMismatch);
}

}  // namespace
}  // namespace pathforge::nn

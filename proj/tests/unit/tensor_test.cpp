#include <gtest/gtest.h>

#include <cmath>

#include "../common/gradient_cases.hpp"
#include "hsx/tensor/optim.hpp"

using namespace hsx;
using namespace hsx::tensor;
using hsx::testing::random_tensor;
using hsx::testing::random_values;
using hsx::testing::TD;

namespace {

TD mat(std::size_t r, std::size_t c, std::vector<double> v) { return TD({r, c}, std::move(v)); }

void expect_values(const TD& t, const std::vector<double>& want, double tol = 0) {
  ASSERT_EQ(t.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(t[i], want[i], tol) << "index " << i;
}

}  // namespace

TEST(Tensor, ConstructionChecksLength) {
  EXPECT_THROW(Tensor<float>({2, 3}, std::vector<float>(5)), Error);
  Tensor<float> t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 6u);
  EXPECT_EQ(t.grad()[0], 0.0f);
}

TEST(Matmul, IdentityAndAnnihilation) {
  expect_values(matmul(mat(2, 2, {1, 0, 0, 1}), mat(2, 2, {1, 2, 3, 4})), {1, 2, 3, 4});
  expect_values(matmul(mat(2, 2, {1, 0, 0, 0}), mat(2, 2, {0, 0, 0, 1})), {0, 0, 0, 0});
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(mat(2, 3, std::vector<double>(6)), mat(2, 2, std::vector<double>(4)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  auto a = random_tensor({3, 4}, 1);
  auto b = random_tensor({4, 2}, 2);
  a.set_requires_grad(true);
  backward(sum(matmul(a, b)));
  // d sum(AB) / dA_ik = sum_j B_kj
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(a.grad()[i * 4 + k], b[k * 2] + b[k * 2 + 1], 1e-12);
  const auto r = grad_check([](const auto& in) { return sum(matmul(in[0], in[1])); },
                            {random_tensor({3, 4}, 1), random_tensor({4, 2}, 2)});
  EXPECT_LE(r.max_rel_error, 1e-5);
}

TEST(Conv2d, IdentityAndZeroKernels) {
  auto x = random_tensor({1, 4, 5, 1}, 3);
  expect_values(conv2d(x, TD({1, 1, 1, 1}, 1.0)), x.values());
  expect_values(conv2d(x, TD({3, 3, 1, 1}, 0.0)), std::vector<double>(20, 0.0));
}

TEST(Conv2d, EvenKernelIsAConfigError) {
  try {
    conv2d(TD({1, 4, 4, 1}), TD({2, 2, 1, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Conv2d, MatchesNaiveLoopsIncludingGradients) {
  const std::size_t H = 5, W = 5, Ci = 2, Co = 3, K = 3;
  auto x = random_tensor({1, H, W, Ci}, 4);
  auto k = random_tensor({K, K, Ci, Co}, 5);
  const auto wout = random_values(H * W * Co, 6);
  x.set_requires_grad(true);
  k.set_requires_grad(true);
  auto y = conv2d(x, k);
  backward(sum(mul(y, TD(y.shape(), wout))));

  std::vector<double> ref(H * W * Co, 0), dx(H * W * Ci, 0), dk(K * K * Ci * Co, 0);
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t o = 0; o < Co; ++o)
        for (std::size_t a = 0; a < K; ++a)
          for (std::size_t b = 0; b < K; ++b)
            for (std::size_t c = 0; c < Ci; ++c) {
              const long ii = static_cast<long>(i + a) - 1, jj = static_cast<long>(j + b) - 1;
              if (ii < 0 || jj < 0 || ii >= static_cast<long>(H) || jj >= static_cast<long>(W)) continue;
              const std::size_t xi = (static_cast<std::size_t>(ii) * W + static_cast<std::size_t>(jj)) * Ci + c;
              const std::size_t ki = ((a * K + b) * Ci + c) * Co + o;
              const std::size_t yi = (i * W + j) * Co + o;
              ref[yi] += x[xi] * k[ki];
              dx[xi] += wout[yi] * k[ki];
              dk[ki] += wout[yi] * x[xi];
            }
  expect_values(y, ref, 1e-12);
  for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_NEAR(x.grad()[i], dx[i], 1e-12);
  for (std::size_t i = 0; i < dk.size(); ++i) EXPECT_NEAR(k.grad()[i], dk[i], 1e-12);
}

TEST(Conv1dDilated, OneHotCentreIsIdentity) {
  const auto x = random_values(11, 7);
  std::vector<double> w(9, 0.0);
  w[4] = 1.0;
  const auto y = conv1d_dilated(x, w, 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv1dDilated, ConstantInputGivesWeightSumInInterior) {
  const std::vector<double> x(30, 2.5);
  const auto w = random_values(9, 8);
  double s = 0;
  for (double v : w) s += v;
  const auto y = conv1d_dilated(x, w, 2, 0.0);
  for (std::size_t t = 8; t < 22; ++t) EXPECT_NEAR(y[t], 2.5 * s, 1e-12);
}

TEST(Conv1dDilated, MatchesNaiveReference) {
  const auto x = random_values(20, 9);
  const auto w = random_values(9, 10);
  for (std::size_t d : {1u, 2u, 3u}) {
    const auto y = conv1d_dilated(x, w, d, 0.25);
    for (int t = 0; t < 20; ++t) {
      double s = 0;
      for (int k = -4; k <= 4; ++k) {
        const int idx = t + k * static_cast<int>(d);
        if (idx >= 0 && idx < 20) s += w[static_cast<std::size_t>(k + 4)] * x[static_cast<std::size_t>(idx)];
      }
      EXPECT_NEAR(y[static_cast<std::size_t>(t)], s - 0.25, 1e-6);
    }
  }
  EXPECT_THROW(conv1d_dilated(x, w, 0), Error);
}

TEST(Softmax, SymmetryAndStability) {
  expect_values(softmax(mat(1, 3, {0, 0, 0})), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-12);
  expect_values(softmax(mat(1, 3, {1000, 0, 0})), {1, 0, 0}, 1e-6);
}

TEST(Softmax, RowsSumToOne) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto y = softmax(random_tensor({5, 7}, s, -50, 50));
    for (std::size_t r = 0; r < 5; ++r) {
      double t = 0;
      for (std::size_t k = 0; k < 7; ++k) {
        EXPECT_GE(y[r * 7 + k], 0.0);
        t += y[r * 7 + k];
      }
      EXPECT_NEAR(t, 1.0, 1e-6);
    }
  }
}

TEST(CrossEntropy, AnalyticValues) {
  const std::vector<std::uint32_t> t{2};
  EXPECT_NEAR(cross_entropy(mat(1, 4, {0, 0, 0, 0}), t, kIgnoreLabel).item(), std::log(4.0), 1e-12);
  EXPECT_LT(cross_entropy(mat(1, 4, {0, 0, 50, 0}), t, kIgnoreLabel).item(), 1e-12);
}

TEST(CrossEntropy, AllIgnoredIsZeroWithZeroGradient) {
  auto x = random_tensor({2, 3}, 12);
  x.set_requires_grad(true);
  const std::vector<std::uint32_t> t{kIgnoreLabel, kIgnoreLabel};
  auto l = cross_entropy(x, t, kIgnoreLabel);
  EXPECT_EQ(l.item(), 0.0);
  backward(l);
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(CrossEntropy, OutOfRangeTargetIsDataError) {
  const std::vector<std::uint32_t> t{0, 3};
  try {
    cross_entropy(random_tensor({2, 3}, 1), t, kIgnoreLabel);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Data);
  }
}

TEST(Activations, ReluAndGeluValues) {
  expect_values(relu(mat(1, 3, {-1, 0, 2})), {0, 0, 2});
  const auto g = gelu(mat(1, 3, {-1, 0, 1}));
  // erf form: x * Phi(x)
  EXPECT_NEAR(g[1], 0.0, 1e-15);
  EXPECT_NEAR(g[2], 0.8413447461, 1e-9);
  EXPECT_NEAR(g[0], -0.1586552539, 1e-9);
}

TEST(Pooling, MaxpoolAndUpsample) {
  TD x({1, 2, 2, 1}, std::vector<double>{1, 5, 3, 2});
  expect_values(maxpool2d(x), {5});
  expect_values(upsample2x(x), {1, 1, 5, 5, 1, 1, 5, 5, 3, 3, 2, 2, 3, 3, 2, 2});
  try {
    maxpool2d(TD({1, 3, 2, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

TEST(Mse, MaskSelectsEntries) {
  auto p = mat(1, 3, {1, 2, 3});
  auto t = mat(1, 3, {0, 0, 0});
  EXPECT_NEAR(mse(p, t).item(), 14.0 / 3.0, 1e-12);
  EXPECT_NEAR(mse(p, t, {false, true, true}).item(), 6.5, 1e-12);
  EXPECT_EQ(mse(p, t, {false, false, false}).item(), 0.0);
}

TEST(Dropout, EvalIsBitwiseIdentity) {
  auto x = random_tensor({50}, 13);
  const auto y = dropout(x, 0.4, false, 42, stream("d"));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(x[i]), std::bit_cast<std::uint64_t>(y[i]));
}

TEST(Dropout, TrainModeIsUnbiased) {
  // E[y] = x; Var[y] = x^2 p / (1 - p) per element.
  const double p = 0.3, xv = 2.0;
  const std::size_t n = 10000;
  const auto y = dropout(TD({n}, xv), p, true, 42, stream("dropout.trial"));
  double m = 0;
  for (double v : y.values()) {
    EXPECT_TRUE(v == 0.0 || std::fabs(v - xv / (1 - p)) < 1e-12);
    m += v;
  }
  m /= static_cast<double>(n);
  const double sigma = std::sqrt(xv * xv * p / (1 - p) / static_cast<double>(n));
  EXPECT_LE(std::fabs(m - xv), 3 * sigma);
}

TEST(BatchNorm, EvalModeIsBatchIndependentAffineMap) {
  BatchNormStats<double> st(2);
  st.mean = {0.5, -1.0};
  st.var = {4.0, 0.25};
  TD g({2}, std::vector<double>{2.0, 1.0}), b({2}, std::vector<double>{0.1, 0.0});
  const auto one = batch_norm(TD({1, 2}, std::vector<double>{1.5, 0.0}), g, b, st, false);
  const auto many = batch_norm(TD({3, 2}, std::vector<double>{9, 9, 1.5, 0.0, -3, 7}), g, b, st, false);
  EXPECT_DOUBLE_EQ(one[0], many[2]);
  EXPECT_DOUBLE_EQ(one[1], many[3]);
  EXPECT_NEAR(one[0], 2.0 * (1.0 / std::sqrt(4.0 + 1e-5)) + 0.1, 1e-12);
  EXPECT_NEAR(one[1], 1.0 * (1.0 / std::sqrt(0.25 + 1e-5)), 1e-12);
}

TEST(BatchNorm, TrainModeUpdatesRunningStats) {
  BatchNormStats<double> st(1);
  TD g({1}, 1.0), b({1}, 0.0);
  const auto y = batch_norm(TD({4, 1}, std::vector<double>{1, 2, 3, 4}), g, b, st, true);
  double m = 0;
  for (double v : y.values()) m += v;
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_NEAR(st.mean[0], 0.1 * 2.5, 1e-12);
  EXPECT_NEAR(st.var[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-12);
}

TEST(Backward, TwiceWithoutZeroingDoublesGradients) {
  auto a = random_tensor({3, 3}, 14);
  auto b = random_tensor({3, 3}, 15);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  auto l = sum(mul(relu(matmul(a, b)), a));
  backward(l);
  const std::vector<double> ga(a.grad().begin(), a.grad().end()), gb(b.grad().begin(), b.grad().end());
  backward(l);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(a.grad()[i], 2 * ga[i]);
    EXPECT_EQ(b.grad()[i], 2 * gb[i]);
  }
}

TEST(Backward, TapeIsTopologicalAndVisitsEachNodeOnce) {
  auto a = random_tensor({2, 2}, 16);
  a.set_requires_grad(true);
  auto h = relu(a);
  auto l = sum(add(mul(h, h), h));  // diamond: h used three times
  const auto tape = Tape<double>::record(l);
  std::vector<const Node<double>*> order(tape.order().begin(), tape.order().end());
  EXPECT_EQ(std::set<const Node<double>*>(order.begin(), order.end()).size(), order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (const auto& p : order[i]->parents) {
      if (!p || !p->requires_grad) continue;
      const auto it = std::find(order.begin(), order.end(), p.get());
      ASSERT_NE(it, order.end());
      EXPECT_LT(static_cast<std::size_t>(it - order.begin()), i);
    }
  EXPECT_EQ(order.back(), &l.node());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto w = random_tensor({4}, 17);
  w.set_requires_grad(true);
  ParamList<double> pl;
  pl.add("w", w);
  Adam<double> opt(pl);
  const auto before = w.values();
  (void)w.grad();  // allocate a zero gradient
  for (int i = 0; i < 3; ++i) opt.step(1e-2);
  EXPECT_EQ(w.values(), before);
  EXPECT_EQ(opt.state(0).t, 3);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With bias correction the first update is lr * g / (|g| + eps).
  TD w({2}, std::vector<double>{1.0, -1.0}, true);
  ParamList<double> pl;
  pl.add("w", w);
  Adam<double> opt(pl);
  w.grad()[0] = 0.5;
  w.grad()[1] = -2.0;
  opt.step(0.1);
  EXPECT_NEAR(w[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(w[1], -1.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-12);
}

TEST(Sgd, StepIsPlainDescent) {
  TD w({2}, std::vector<double>{1.0, 2.0}, true);
  ParamList<double> pl;
  pl.add("w", w);
  Sgd<double> opt(pl);
  w.grad()[0] = 1.0;
  w.grad()[1] = -3.0;
  opt.step(0.1);
  EXPECT_NEAR(w[0], 0.9, 1e-15);
  EXPECT_NEAR(w[1], 2.3, 1e-15);
}

class PrimitiveGradients : public ::testing::TestWithParam<std::size_t> {};

TEST_P(PrimitiveGradients, MatchFiniteDifferences) {
  const auto cases = hsx::testing::primitive_cases();
  const auto& c = cases.at(GetParam());
  for (std::uint64_t seed = 0; seed < 3; ++seed) EXPECT_LE(c.run(seed), 1e-4) << c.name << " seed " << seed;
}

INSTANTIATE_TEST_SUITE_P(AllOps, PrimitiveGradients,
                         ::testing::Range<std::size_t>(0, hsx::testing::primitive_cases().size()),
                         [](const auto& info) { return hsx::testing::primitive_cases()[info.param].name; });

TEST(ComposedGradients, HeadsAndReconstructionLoss) {
  for (const auto& c : hsx::testing::composed_cases()) EXPECT_LE(c.run(1), 1e-4) << c.name;
}

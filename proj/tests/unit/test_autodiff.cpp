#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "tasktcn/autodiff/gradcheck.hpp"
#include "tasktcn/autodiff/ops.hpp"
#include "tasktcn/autodiff/optim.hpp"
#include "tasktcn/autodiff/tape.hpp"

using namespace tasktcn;
using namespace tasktcn::autodiff;

namespace {

Tensor<double> t1(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({n}, std::move(v));
}

Tensor<double> seq(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({1, 1, n}, std::move(v));
}

Tensor<double> randn(Shape s, Rng& rng) {
  Tensor<double> t(std::move(s));
  std::normal_distribution<double> d;
  for (double& v : t.values()) v = d(rng);
  return t;
}

}  // namespace

TEST(Tape, SumOfSquaresGradient) {
  Tape<double> tape;
  auto x = tape.leaf(t1({1, -2, 3}));
  auto loss = sum(mul(x, x));
  tape.backward(loss);
  const auto g = tape.grad(x);
  EXPECT_DOUBLE_EQ(g[0], 2);
  EXPECT_DOUBLE_EQ(g[1], -4);
  EXPECT_DOUBLE_EQ(g[2], 6);
}

TEST(Tape, SharedSubexpressionAccumulates) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>::scalar(3));
  auto y = mul(x, x);
  auto loss = add(y, y);  // 2x^2
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 12);
}

TEST(Tape, UnreachedLeafHasZeroGrad) {
  Tape<double> tape;
  auto x = tape.leaf(t1({1, 2}));
  auto unused = tape.leaf(t1({5, 5}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(unused), Tensor<double>({2}));
}

TEST(Tape, ConstantsGetNoGradient) {
  Tape<double> tape;
  auto x = tape.leaf(t1({2}));
  auto c = tape.constant(t1({7}));
  tape.backward(sum(mul(x, c)));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 7);
  EXPECT_FALSE(c.requires_grad());
}

TEST(Tape, NonScalarLossRejected) {
  Tape<double> tape;
  auto x = tape.leaf(t1({1, 2}));
  EXPECT_THROW(tape.backward(mul(x, x)), ContractViolation);
}

TEST(Tape, NonFiniteGradientRaises) {
  Tape<double> tape;
  auto x = tape.leaf(t1({1}));
  auto loss = sum(scale(x, std::numeric_limits<double>::infinity()));
  EXPECT_THROW(tape.backward(loss), NumericalFault);
}

TEST(Tape, ForeignLossRejected) {
  Tape<double> a, b;
  auto x = b.leaf(t1({1}));
  EXPECT_THROW(a.backward(sum(x)), ContractViolation);
}

TEST(Ops, ShapeMismatchRejected) {
  Tape<double> tape;
  auto a = tape.leaf(t1({1, 2}));
  auto b = tape.leaf(t1({1, 2, 3}));
  EXPECT_THROW(add(a, b), ContractViolation);
  EXPECT_THROW(reshape(a, {3}), ContractViolation);
}

TEST(Ops, LinearExample) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor<double>({1, 2}, {1, 2}));
  auto w = tape.leaf(Tensor<double>({1, 2}, {1, 1}));
  auto b = tape.leaf(t1({1}));
  auto y = linear(x, w, b);
  ASSERT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(y.value()[0], 4);
  tape.backward(sum(y));
  EXPECT_DOUBLE_EQ(tape.grad(w)[0], 1);
  EXPECT_DOUBLE_EQ(tape.grad(w)[1], 2);
  EXPECT_DOUBLE_EQ(tape.grad(b)[0], 1);
}

TEST(Ops, CausalConvExamples) {
  Tape<double> tape;
  auto x = tape.constant(seq({1, 2, 3}));
  auto w = tape.constant(Tensor<double>({1, 1, 2}, {1, 1}));
  auto y = conv1d_causal(x, w, Var<double>{}, 1);
  EXPECT_EQ(y.value(), seq({1, 3, 5}));

  auto x2 = tape.constant(seq({1, 2, 3, 4}));
  auto y2 = conv1d_causal(x2, w, Var<double>{}, 2);
  EXPECT_EQ(y2.value(), seq({1, 2, 4, 6}));
}

TEST(Ops, CausalConvKernelOrder) {
  // last tap reads the current step
  Tape<double> tape;
  auto x = tape.constant(seq({1, 10, 100}));
  auto w = tape.constant(Tensor<double>({1, 1, 2}, {2, 1}));
  auto y = conv1d_causal(x, w, Var<double>{}, 1);
  EXPECT_EQ(y.value(), seq({1, 12, 120}));
}

TEST(Ops, CausalConvChannelMismatch) {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({1, 2, 3}));
  auto w = tape.constant(Tensor<double>({1, 3, 2}));
  EXPECT_THROW(conv1d_causal(x, w, Var<double>{}, 1), ContractViolation);
  auto w2 = tape.constant(Tensor<double>({1, 2, 2}));
  EXPECT_THROW(conv1d_causal(x, w2, Var<double>{}, 0), ContractViolation);
}

TEST(Ops, CausalConvNoFutureLeak) {
  Rng rng(5);
  const auto w = randn({3, 2, 3}, rng);
  const auto b = randn({3}, rng);
  auto base = randn({2, 2, 20}, rng);
  for (std::size_t dilation : {1u, 2u, 4u}) {
    for (std::size_t t0 = 0; t0 < 20; t0 += 3) {
      auto perturbed = base;
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t c = 0; c < 2; ++c)
          for (std::size_t t = t0; t < 20; ++t) perturbed[(n * 2 + c) * 20 + t] += 5.0;
      Tape<double> tape;
      auto y1 = conv1d_causal(tape.constant(base), tape.constant(w), tape.constant(b), dilation);
      auto y2 = conv1d_causal(tape.constant(perturbed), tape.constant(w), tape.constant(b), dilation);
      for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t o = 0; o < 3; ++o)
          for (std::size_t t = 0; t < t0; ++t) {
            const std::size_t i = (n * 3 + o) * 20 + t;
            EXPECT_EQ(y1.value()[i], y2.value()[i]) << "d=" << dilation << " t0=" << t0;
          }
    }
  }
}

TEST(Ops, BatchNormEvalExample) {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({1, 1}, {3}));
  auto g = tape.constant(t1({1}));
  auto b = tape.constant(t1({0}));
  RunningStats<double> stats{t1({2}), t1({1})};
  auto y = batch_norm(x, g, b, &stats, Phase::eval);
  EXPECT_NEAR(y.value()[0], 1.0 / std::sqrt(1.0 + 1e-5), 1e-12);
}

TEST(Ops, BatchNormTrainNormalisesAndUpdatesStats) {
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({4, 1}, {1, 2, 3, 4}));
  auto g = tape.constant(t1({1}));
  auto b = tape.constant(t1({0}));
  auto stats = RunningStats<double>::fresh(1);
  auto y = batch_norm(x, g, b, &stats, Phase::train, 0.1);
  double m = 0, v = 0;
  for (double e : y.value().values()) m += e;
  m /= 4;
  for (double e : y.value().values()) v += (e - m) * (e - m);
  v /= 4;
  EXPECT_NEAR(m, 0, 1e-12);
  EXPECT_NEAR(v, 1.25 / (1.25 + 1e-5), 1e-9);
  EXPECT_NEAR(stats.mean[0], 0.25, 1e-12);
  EXPECT_GT(stats.var[0], 1.0);  // moved toward the batch variance
}

TEST(Ops, WeightNormUnitDirection) {
  Tape<double> tape;
  auto v = tape.constant(Tensor<double>({2, 2}, {3, 4, 0, 2}));
  auto g = tape.constant(t1({10, 3}));
  auto w = weight_norm(v, g);
  EXPECT_NEAR(w.value()[0], 6, 1e-12);
  EXPECT_NEAR(w.value()[1], 8, 1e-12);
  EXPECT_NEAR(w.value()[2], 0, 1e-12);
  EXPECT_NEAR(w.value()[3], 3, 1e-12);
}

TEST(Ops, ReluAndSoftplus) {
  Tape<double> tape;
  auto x = tape.leaf(t1({-1, 0, 2, 30}));
  auto r = relu(x);
  EXPECT_EQ(r.value(), t1({0, 0, 2, 30}));
  tape.backward(sum(r));
  EXPECT_EQ(tape.grad(x), t1({0, 0, 1, 1}));
  auto s = softplus(tape.constant(t1({0, 30})));
  EXPECT_NEAR(s.value()[0], std::log(2.0), 1e-12);
  EXPECT_NEAR(s.value()[1], 30, 1e-9);
}

TEST(Ops, MseExample) {
  Tape<double> tape;
  auto p = tape.leaf(t1({1, 2}));
  auto l = mse_loss(p, t1({1, 0}));
  EXPECT_DOUBLE_EQ(l.value().item(), 2.0);
  tape.backward(l);
  EXPECT_EQ(tape.grad(p), t1({0, 2}));
}

TEST(Ops, KldExamples) {
  Tape<double> tape;
  auto a = kld_std_normal(tape.constant(t1({1})), tape.constant(t1({1})));
  EXPECT_NEAR(a.value().item(), 0.5, 1e-12);
  auto b = kld_std_normal(tape.constant(t1({0})), tape.constant(t1({2})));
  EXPECT_NEAR(b.value().item(), 0.5 * (4 - 1 - std::log(4.0)), 1e-12);
  EXPECT_NEAR(b.value().item(), 0.8069, 1e-4);
  auto c = kld_std_normal(tape.constant(t1({0, 0})), tape.constant(t1({1, 1})));
  EXPECT_DOUBLE_EQ(c.value().item(), 0.0);
}

TEST(Ops, KldMatchesMonteCarlo) {
  // E_q[log q(z) - log p(z)] for q = N(0.7, 0.6^2)
  const double mu = 0.7, sigma = 0.6;
  Rng rng(17);
  std::normal_distribution<double> d;
  double acc = 0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double e = d(rng);
    const double z = mu + sigma * e;
    acc += (-0.5 * e * e - std::log(sigma)) - (-0.5 * z * z);
  }
  Tape<double> tape;
  auto k = kld_std_normal(tape.constant(t1({mu})), tape.constant(t1({sigma})));
  EXPECT_NEAR(acc / n, k.value().item(), 5e-3);
}

TEST(Ops, DropoutEvalIsIdentityAndTrainPreservesMean) {
  Rng rng(3);
  Tape<double> tape;
  auto x = tape.constant(Tensor<double>({200000}, 1.0));
  auto e = dropout(x, 0.3, Phase::eval, rng);
  EXPECT_EQ(e.id(), x.id());
  auto y = dropout(x, 0.3, Phase::train, rng);
  double m = 0;
  std::size_t zeros = 0;
  for (double v : y.value().values()) {
    m += v;
    zeros += v == 0.0;
  }
  EXPECT_NEAR(m / 200000, 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / 200000, 0.3, 0.005);
  EXPECT_THROW(dropout(x, 1.0, Phase::train, rng), ContractViolation);
}

TEST(Ops, GatherConcatRepeat) {
  Tape<double> tape;
  auto table = tape.leaf(Tensor<double>({3, 2}, {0, 1, 10, 11, 20, 21}));
  const std::vector<std::size_t> rows{2, 0, 2};
  auto g = gather_rows(table, std::span<const std::size_t>(rows));
  EXPECT_EQ(g.value(), Tensor<double>({3, 2}, {20, 21, 0, 1, 20, 21}));
  tape.backward(sum(g));
  EXPECT_EQ(tape.grad(table), Tensor<double>({3, 2}, {1, 1, 0, 0, 2, 2}));

  auto a = tape.constant(Tensor<double>({1, 1}, {1}));
  auto b = tape.constant(Tensor<double>({1, 2}, {2, 3}));
  EXPECT_EQ(concat_features(a, b).value(), Tensor<double>({1, 3}, {1, 2, 3}));
  EXPECT_EQ(repeat_time(b, 2).value(), Tensor<double>({1, 2, 2}, {2, 2, 3, 3}));
}

TEST(Optim, AdamFirstStepClosedForm) {
  std::vector<double> p{1.0, -2.0};
  const std::vector<double> g{0.5, -4.0};
  AdamState<double> s(2);
  adam_step<double>(p, g, s, 0.1);
  // m_hat = g, v_hat = g^2 on the first step
  EXPECT_NEAR(p[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(p[1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
}

TEST(Optim, AdamSecondStepAndDecay) {
  std::vector<double> p{1.0};
  AdamState<double> s(1);
  adam_step<double>(p, std::vector<double>{1.0}, s, 0.01, 0.5);
  const double p1 = 1.0 * (1 - 0.005) - 0.01 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(p[0], p1, 1e-12);
  adam_step<double>(p, std::vector<double>{3.0}, s, 0.01, 0.5);
  const double m = 0.9 * 0.1 + 0.1 * 3.0, v = 0.999 * 0.001 + 0.001 * 9.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p[0], p1 * (1 - 0.005) - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-12);
}

TEST(Optim, AdamRejectsBadArguments) {
  std::vector<double> p{1.0};
  AdamState<double> s(1);
  EXPECT_THROW(adam_step<double>(p, std::vector<double>{1.0}, s, 0.0), ContractViolation);
  EXPECT_THROW(adam_step<double>(p, std::vector<double>{1.0}, s, 0.1, -1), ContractViolation);
  EXPECT_THROW(adam_step<double>(p, std::vector<double>{1.0, 2.0}, s, 0.1), ContractViolation);
}

TEST(Optim, OneCycleShape) {
  OneCycleSchedule s;
  s.total_steps = 101;
  s.lr_max = 1e-3;
  EXPECT_EQ(s.peak_step(), 30u);
  EXPECT_NEAR(s.lr(0), 4e-5, 1e-15);
  EXPECT_NEAR(s.lr(30), 1e-3, 1e-15);
  EXPECT_NEAR(s.lr(100), 1e-7, 1e-15);
  for (std::size_t i = 1; i <= 30; ++i) EXPECT_GT(s.lr(i), s.lr(i - 1));
  for (std::size_t i = 31; i <= 100; ++i) EXPECT_LT(s.lr(i), s.lr(i - 1));
  EXPECT_THROW(s.lr(101), ContractViolation);
  OneCycleSchedule single;
  single.total_steps = 1;
  EXPECT_DOUBLE_EQ(single.lr(0), single.lr_max);
}

TEST(GradCheck, SuitePassesInDouble) {
  for (std::uint64_t seed : {1u, 2021u, 77u}) {
    const auto report = run_gradcheck_suite(seed);
    EXPECT_GE(report.entries.size(), 15u);
    for (const auto& e : report.entries) {
      EXPECT_TRUE(e.passed) << e.op << " rel=" << e.max_rel_error;
      EXPECT_LT(e.max_rel_error, 1e-4) << e.op;
    }
  }
}

TEST(GradCheck, DetectsFlippedBackward) {
  for (const char* op : {"conv1d_causal", "relu", "linear", "batch_norm", "kld_std_normal"}) {
    tasktcn::autodiff::testing::ScopedBackwardSignFlip flip(op);
    const auto report = run_gradcheck_suite(2021);
    bool caught = false;
    for (const auto& e : report.entries) {
      if (e.op.rfind(op, 0) == 0 && !e.passed) caught = true;
    }
    EXPECT_TRUE(caught) << op;
  }
  EXPECT_TRUE(run_gradcheck_suite(2021).all_passed());
}

TEST(GradCheck, ConvByHandFunction) {
  Rng rng(9);
  const double err = grad_check(
      [](Tape<double>& tape, std::span<const Var<double>> in) {
        auto y = conv1d_causal(in[0], in[1], in[2], 2);
        return sum(mul(y, tape.constant(Tensor<double>(y.shape(), 0.3))));
      },
      {randn({2, 3, 7}, rng), randn({2, 3, 3}, rng), randn({2}, rng)});
  EXPECT_LT(err, 1e-6);
}

TEST(Determinism, SameInputsSameBits) {
  auto run = [] {
    Rng rng(42);
    Tape<float> tape;
    auto x = tape.leaf(randn({2, 3, 16}, rng).cast<float>());
    auto w = tape.leaf(randn({4, 3, 2}, rng).cast<float>());
    auto y = relu(conv1d_causal(x, w, Var<float>{}, 4));
    auto l = mean(mul(y, y));
    tape.backward(l);
    return std::make_pair(l.value().item(), tape.grad(w));
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Precision, FloatTracksDouble) {
  Rng rng(8);
  const auto xd = randn({3, 2, 10}, rng);
  const auto wd = randn({2, 2, 2}, rng);
  Tape<double> td;
  auto ld = sum(conv1d_causal(td.leaf(xd), td.leaf(wd), Var<double>{}, 2));
  Tape<float> tf;
  auto lf = sum(conv1d_causal(tf.leaf(xd.cast<float>()), tf.leaf(wd.cast<float>()), Var<float>{}, 2));
  EXPECT_NEAR(ld.value().item(), lf.value().item(), 1e-4);
}

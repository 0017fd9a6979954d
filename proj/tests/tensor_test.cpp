// Copyright 2026 The gxplain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gxplain/rng.hpp"
#include "gxplain/tensor.hpp"

namespace gx = gxplain;
namespace ad = gxplain::ad;
using gx::Tensor;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, gx::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const auto m = Tensor::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(gx::matmul(Tensor::from_rows({{1, 0}, {0, 1}}), m), m);
}

TEST(Matmul, ScalarProduct) { EXPECT_EQ(gx::matmul(Tensor::scalar(2), Tensor::scalar(3)), Tensor::scalar(6)); }

TEST(Matmul, Projector) {
  EXPECT_EQ(gx::matmul(Tensor::from_rows({{1, 0}, {0, 0}}), Tensor::from_rows({{5, 7}, {9, 9}})),
            Tensor::from_rows({{5, 7}, {0, 0}}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    gx::matmul(Tensor(2, 3), Tensor(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const gx::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
  ad::Tape tape;
  EXPECT_THROW(ad::matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3))), gx::DimensionError);
}

TEST(Elementwise, Examples) {
  ad::Tape tape;
  EXPECT_EQ(ad::relu(tape.constant(Tensor::column({-1, 0, 2}))).value(), Tensor::column({0, 0, 2}));
  EXPECT_EQ(ad::sigmoid(tape.constant(Tensor::column({0}))).value(), Tensor::column({0.5}));
  EXPECT_EQ(ad::clamp01(tape.constant(Tensor::column({-0.2, 0.5, 1.3}))).value(), Tensor::column({0, 0.5, 1}));
}

TEST(Elementwise, IncompatibleShapesRejected) {
  ad::Tape tape;
  EXPECT_THROW(ad::add(tape.constant(Tensor(2, 1)), tape.constant(Tensor(3, 1))), gx::DimensionError);
  EXPECT_THROW(ad::mul(tape.constant(Tensor(2, 2)), tape.constant(Tensor(2, 1))), gx::DimensionError);
}

TEST(Elementwise, ScalarBroadcast) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({1, 2, 3}), true);
  const auto s = tape.leaf(Tensor::scalar(2), true);
  const auto y = ad::sum(ad::mul(x, s));
  EXPECT_DOUBLE_EQ(y.value().item(), 12.0);
  tape.backward(y);
  EXPECT_EQ(x.grad(), Tensor::column({2, 2, 2}));
  EXPECT_EQ(s.grad(), Tensor::scalar(6));
}

TEST(Elementwise, ReluGradientAtZeroIsZero) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({-1, 0, 2}), true);
  tape.backward(ad::sum(ad::relu(x)));
  EXPECT_EQ(x.grad(), Tensor::column({0, 0, 1}));
}

TEST(Elementwise, Clamp01GradientIsExactlyZeroOrOne) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({-0.2, 0.0, 1e-9, 0.5, 1.0 - 1e-9, 1.0, 1.3}), true);
  tape.backward(ad::sum(ad::clamp01(x)));
  EXPECT_EQ(x.grad(), Tensor::column({0, 0, 1, 1, 1, 0, 0}));
}

TEST(Reduce, Examples) {
  ad::Tape tape;
  EXPECT_EQ(ad::sum(tape.constant(Tensor::column({1, 2, 3}))).value().item(), 6.0);
  EXPECT_EQ(ad::mean(tape.constant(Tensor::column({2, 4}))).value().item(), 3.0);
  EXPECT_EQ(ad::mean(tape.constant(Tensor::from_rows({{1, 1}, {1, 1}}))).value().item(), 1.0);
}

TEST(Reduce, EmptyTensorIsDomainError) {
  ad::Tape tape;
  EXPECT_THROW(ad::sum(tape.constant(Tensor())), gx::DomainError);
  EXPECT_THROW(ad::mean(tape.constant(Tensor(0, 3))), gx::DomainError);
}

TEST(Loss, Examples) {
  ad::Tape tape;
  EXPECT_EQ(ad::mse(tape.constant(Tensor::column({1, 2})), tape.constant(Tensor::column({1, 2}))).value().item(),
            0.0);
  EXPECT_NEAR(ad::softmax_cross_entropy(tape.constant(Tensor(1, 2)), 0).value().item(), std::numbers::ln2, 1e-15);
  EXPECT_NEAR(ad::bce_with_logits(tape.constant(Tensor::scalar(0)), tape.constant(Tensor::scalar(1))).value().item(),
              std::numbers::ln2, 1e-15);
}

TEST(Loss, BceIsStableForLargeLogits) {
  ad::Tape tape;
  const auto big = ad::bce_with_logits(tape.constant(Tensor::scalar(800)), tape.constant(Tensor::scalar(0)));
  EXPECT_NEAR(big.value().item(), 800.0, 1e-9);
  const auto small = ad::bce_with_logits(tape.constant(Tensor::scalar(-800)), tape.constant(Tensor::scalar(0)));
  EXPECT_NEAR(small.value().item(), 0.0, 1e-12);
}

TEST(Loss, ClassIndexOutOfRange) {
  ad::Tape tape;
  EXPECT_THROW(ad::softmax_cross_entropy(tape.constant(Tensor(1, 2)), 2), gx::DomainError);
}

TEST(Backward, SumOfSquares) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({1, 2, 3}), true);
  tape.backward(ad::sum(ad::mul(x, x)));
  EXPECT_EQ(x.grad(), Tensor::column({2, 4, 6}));
}

TEST(Backward, MeanDistributesEvenly) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({5, -1, 2, 7}), true);
  tape.backward(ad::mean(x));
  EXPECT_EQ(x.grad(), Tensor::column({0.25, 0.25, 0.25, 0.25}));
}

TEST(Backward, MseOfLinearMapMatchesFiniteDifferences) {
  gx::Rng rng(3, "test");
  const Tensor w = random_tensor(3, 4, rng);
  const Tensor x = random_tensor(4, 1, rng);
  const Tensor y = random_tensor(3, 1, rng);
  const auto err = ad::finite_diff_check(
      [&](ad::Tape& tape, ad::Var p) {
        return ad::mse(ad::matmul(ad::slice(p, 0, 3, 4), tape.constant(x)), tape.constant(y));
      },
      w.data, 1e-5);
  EXPECT_LE(err, 1e-4);
}

TEST(Backward, NonScalarRootIsContractError) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({1, 2}), true);
  EXPECT_THROW(tape.backward(x), gx::ContractError);
}

TEST(Backward, SecondCallAccumulates) {
  ad::Tape tape;
  const auto x = tape.leaf(Tensor::column({1, 2}), true);
  const auto y = ad::sum(ad::scale(x, 3.0));
  tape.backward(y);
  tape.backward(y);
  EXPECT_EQ(x.grad(), Tensor::column({6, 6}));
  tape.zero_grad();
  tape.backward(y);
  EXPECT_EQ(x.grad(), Tensor::column({3, 3}));
}

TEST(Backward, DeterministicAcrossRuns) {
  gx::Rng rng(9, "test");
  const Tensor a = random_tensor(5, 4, rng), b = random_tensor(4, 3, rng);
  auto run = [&] {
    ad::Tape tape;
    const auto va = tape.leaf(a, true);
    const auto vb = tape.leaf(b, true);
    tape.backward(ad::mean(ad::sigmoid(ad::matmul(va, vb))));
    return std::make_pair(va.grad(), vb.grad());
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDiff, QuadraticIsNearlyExact) {
  const auto err = ad::finite_diff_check([](ad::Tape&, ad::Var x) { return ad::sum(ad::mul(x, x)); }, {3.0}, 1e-5);
  EXPECT_LE(err, 1e-6);
}

TEST(FiniteDiff, SigmoidAtZero) {
  const auto err = ad::finite_diff_check([](ad::Tape&, ad::Var x) { return ad::sum(ad::sigmoid(x)); }, {0.0}, 1e-5);
  EXPECT_LE(err, 1e-6);
}

TEST(FiniteDiff, NonFiniteValueIsNumericError) {
  EXPECT_THROW(ad::finite_diff_check([](ad::Tape&, ad::Var x) { return ad::sum(ad::scale(x, INFINITY)); }, {1.0},
                                     1e-5),
               gx::NumericError);
}

TEST(FiniteDiff, NonPositiveStepRejected) {
  EXPECT_THROW(ad::finite_diff_check([](ad::Tape&, ad::Var x) { return ad::sum(x); }, {1.0}, 0.0), gx::DomainError);
}

// Property: every primitive agrees with central differences on random small inputs.
class PrimitiveGradient : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGradient, MatchesFiniteDifferences) {
  gx::Rng rng(static_cast<std::uint64_t>(GetParam()), "primitive");
  const Tensor c = random_tensor(3, 3, rng);
  const Tensor bias = random_tensor(1, 3, rng);
  const Tensor target = random_tensor(3, 1, rng);
  const std::vector<std::size_t> partner{1, 0, 3, 2, 5, 4};
  const std::vector<std::size_t> edges{0, 1, 1, 0, 1, 2, 2, 1, 0, 2, 2, 0};
  std::vector<std::function<ad::Var(ad::Tape&, ad::Var)>> fns{
      [&](ad::Tape& t, ad::Var x) { return ad::mean(ad::matmul(ad::slice(x, 0, 3, 3), t.constant(c))); },
      [&](ad::Tape& t, ad::Var x) { return ad::mean(ad::matmul(t.constant(c), ad::slice(x, 0, 3, 3))); },
      [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::mul(ad::slice(x, 0, 3, 3), t.constant(c))); },
      [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::add(ad::slice(x, 0, 3, 3), t.constant(c))); },
      [&](ad::Tape&, ad::Var x) { return ad::sum(ad::mul(ad::slice(x, 0, 3, 3), ad::slice(x, 0, 3, 3))); },
      [&](ad::Tape&, ad::Var x) { return ad::mean(ad::scale(ad::mul(x, x), -1.7)); },
      [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::sigmoid(ad::add_bias(ad::slice(x, 0, 3, 3), t.constant(bias)))); },
      [&](ad::Tape&, ad::Var x) { return ad::sum(ad::mul(ad::relu(x), x)); },
      [&](ad::Tape&, ad::Var x) { return ad::sum(ad::log(ad::add(ad::mul(x, x), x.tape->constant(Tensor::scalar(1))))); },
      [&](ad::Tape&, ad::Var x) { return ad::mean(ad::binary_entropy(ad::sigmoid(x))); },
      [&](ad::Tape& t, ad::Var x) { return ad::mse(ad::slice(x, 0, 3, 1), t.constant(target)); },
      [&](ad::Tape& t, ad::Var x) { return ad::bce_with_logits(ad::slice(x, 0, 3, 1), t.constant(Tensor::column({1, 0, 1}))); },
      [&](ad::Tape&, ad::Var x) { return ad::softmax_cross_entropy(ad::slice(x, 0, 1, 4), 2); },
      [&](ad::Tape&, ad::Var x) { return ad::sum(ad::mul(ad::mean_rows(ad::slice(x, 0, 3, 3)), ad::slice(x, 3, 1, 3))); },
      [&](ad::Tape&, ad::Var x) {
        const auto v = ad::pair_average(ad::slice(x, 0, 6, 1), partner);
        return ad::sum(ad::mul(v, ad::slice(x, 2, 6, 1)));
      },
      [&](ad::Tape& t, ad::Var x) {
        const auto w = ad::sigmoid(ad::slice(x, 0, 6, 1));
        const auto a = ad::normalized_adjacency(w, edges, 3);
        return ad::sum(ad::mul(a, t.constant(c)));
      },
  };
  std::vector<double> point(9);
  for (auto& v : point) v = rng.uniform(-1.0, 1.0);
  for (std::size_t k = 0; k < fns.size(); ++k) EXPECT_LE(ad::finite_diff_check(fns[k], point, 1e-5), 1e-4) << "primitive " << k;
}

INSTANTIATE_TEST_SUITE_P(RandomInstances, PrimitiveGradient, ::testing::Range(0, 100));

TEST(NormAdj, MatchesDenseFormula) {
  gx::Rng rng(1, "adj");
  const std::vector<std::size_t> edges{0, 1, 1, 0, 1, 2, 2, 1};
  const std::vector<double> w{0.3, 0.3, 0.9, 0.9};
  ad::Tape tape;
  const auto a = ad::normalized_adjacency(tape.constant(Tensor::column(w)), edges, 3).value();
  const double d0 = 1.3, d1 = 1 + 0.3 + 0.9, d2 = 1.9;
  EXPECT_NEAR(a(0, 0), 1 / d0, 1e-15);
  EXPECT_NEAR(a(0, 1), 0.3 / std::sqrt(d0 * d1), 1e-15);
  EXPECT_NEAR(a(1, 2), 0.9 / std::sqrt(d1 * d2), 1e-15);
  EXPECT_EQ(a(0, 2), 0.0);
}

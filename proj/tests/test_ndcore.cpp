// Copyright 2026 The linmix Authors. All Rights Reserved.
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

#include <cmath>
#include <thread>

#include "test_util.hpp"

namespace linmix {
namespace {

using testing::naive_matmul;
using testing::random_tensor;

// --- Tensor ----------------------------------------------------------------

TEST(Tensor, DataLengthMatchesDims) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, RejectsZeroExtentAndBadRank) {
  EXPECT_THROW(Tensor({0, 3}), ShapeError);
  EXPECT_THROW(Tensor({1, 1, 1, 1}), RankError);
}

TEST(Tensor, RowsRequireRankTwo) {
  EXPECT_THROW(Tensor({3}).rows(), RankError);
}

// --- matmul ----------------------------------------------------------------

TEST(Matmul, IdentityLeftOperand) {
  const Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  EXPECT_EQ(matmul(Tensor::identity(2), b), b);
}

TEST(Matmul, RowTimesColumn) {
  const Tensor c = matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}));
  EXPECT_EQ(c, Tensor::matrix({{11}}));
}

TEST(Matmul, MatchesTripleLoopExactly) {
  Rng rng(1);
  const Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
  EXPECT_EQ(matmul(a, b), naive_matmul(a, b));
}

TEST(Matmul, MatchesTripleLoopUpTo8x8) {
  Rng rng(2);
  for (std::size_t m = 1; m <= 8; ++m)
    for (std::size_t k = 1; k <= 8; ++k)
      for (std::size_t n = 1; n <= 8; n += 3) {
        const Tensor a = random_tensor(rng, {m, k}), b = random_tensor(rng, {k, n});
        ASSERT_EQ(matmul(a, b), naive_matmul(a, b)) << m << "x" << k << "x" << n;
      }
}

TEST(Matmul, TransposeOfProduct) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(8), k = 1 + rng.below(8), n = 1 + rng.below(8);
    const Tensor a = random_tensor(rng, {m, k}), b = random_tensor(rng, {k, n});
    EXPECT_LE(max_abs_diff(transpose(matmul(a, b)),
                           matmul(transpose(b), transpose(a))),
              1e-12);
  }
}

TEST(Matmul, InnerMismatchNamesBothOperands) {
  try {
    matmul(Tensor({2, 3}), Tensor({4, 5}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

// --- transpose -------------------------------------------------------------

TEST(Transpose, SwapsIndices) {
  EXPECT_EQ(transpose(Tensor::matrix({{1, 2}, {3, 4}})),
            Tensor::matrix({{1, 3}, {2, 4}}));
}

TEST(Transpose, RowBecomesColumn) {
  const Tensor t = transpose(Tensor::matrix({{1, 2, 3}}));
  EXPECT_EQ(t.dims(), (Dims{3, 1}));
  EXPECT_EQ(t, Tensor::matrix({{1}, {2}, {3}}));
}

TEST(Transpose, InvolutionIsBitwise) {
  Rng rng(4);
  const Tensor a = random_tensor(rng, {5, 3});
  EXPECT_EQ(transpose(transpose(a)), a);
}

TEST(Transpose, RejectsNonMatrix) {
  EXPECT_THROW(transpose(Tensor({3})), RankError);
}

// --- elementwise -----------------------------------------------------------

TEST(Elementwise, AddZerosIsIdentity) {
  Rng rng(5);
  const Tensor x = random_tensor(rng, {3, 2});
  EXPECT_EQ(add(x, Tensor(x.dims())), x);
}

TEST(Elementwise, Multiply) {
  EXPECT_EQ(mul(Tensor::vector({2, 3}), Tensor::vector({4, 5})), Tensor::vector({8, 15}));
}

TEST(Elementwise, ScaleByOneIsBitwise) {
  Rng rng(6);
  const Tensor x = random_tensor(rng, {2, 2});
  EXPECT_EQ(scale(x, 1.0), x);
}

TEST(Elementwise, SubAndScalarAdd) {
  EXPECT_EQ(sub(Tensor::vector({5, 1}), Tensor::vector({2, 3})), Tensor::vector({3, -2}));
  EXPECT_EQ(add(Tensor::vector({1, 2}), 0.5), Tensor::vector({1.5, 2.5}));
}

TEST(Elementwise, MapAppliesFunction) {
  const Unary square{[](double v) { return v * v; }, [](double v) { return 2 * v; }, 1};
  EXPECT_EQ(map(Tensor::vector({-2, 3}), square), Tensor::vector({4, 9}));
}

TEST(Elementwise, DimsMismatchThrows) {
  EXPECT_THROW(add(Tensor({2, 2}), Tensor({2, 3})), ShapeError);
  EXPECT_THROW(mul(Tensor({2}), Tensor({3})), ShapeError);
}

// --- reduce ----------------------------------------------------------------

TEST(Reduce, MeanOfRow) {
  EXPECT_EQ(reduce(Tensor::matrix({{1, 2, 3}}), Axis::rows, Stat::mean),
            Tensor::vector({2}));
}

TEST(Reduce, VarianceOfConstantRowIsZero) {
  EXPECT_EQ(reduce(Tensor::matrix({{5, 5, 5}}), Axis::rows, Stat::var),
            Tensor::vector({0}));
}

TEST(Reduce, SumOfColumns) {
  EXPECT_EQ(reduce(Tensor::matrix({{1, 2}, {3, 4}}), Axis::cols, Stat::sum),
            Tensor::vector({4, 6}));
}

TEST(Reduce, PopulationVariance) {
  // {1, 2, 3, 4}: mean 2.5, squared deviations sum to 5, population var 1.25.
  EXPECT_DOUBLE_EQ(reduce(Tensor::matrix({{1, 2, 3, 4}}), Axis::rows, Stat::var)[0],
                   1.25);
}

TEST(Reduce, RequiresMatrix) {
  EXPECT_THROW(reduce(Tensor({4}), Axis::rows, Stat::sum), RankError);
}

// --- backward --------------------------------------------------------------

TEST(Backward, SquareAtThree) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({3}));
  tape.backward(mul(x, x));
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 6.0);
}

TEST(Backward, SumOfProductWrtLeftOperand) {
  Rng rng(7);
  const Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
  Tape tape;
  Var av = tape.leaf(a);
  tape.backward(sum_all(matmul(av, tape.constant(b))));
  const Tensor expected = matmul(Tensor({3, 2}, 1.0), transpose(b));
  EXPECT_LE(max_abs_diff(tape.grad(av), expected), 1e-15);
}

TEST(Backward, NonScalarSeedIsContractError) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0));
  EXPECT_THROW(tape.backward(x), ContractError);
}

TEST(Backward, GradientDimsMatchValueDims) {
  Rng rng(8);
  Tape tape;
  Var a = tape.leaf(random_tensor(rng, {3, 4}));
  Var w = tape.leaf(random_tensor(rng, {2, 4}));
  Var y = sum_all(reduce(matmul(a, transpose(w)), Axis::rows, Stat::var));
  tape.backward(y);
  EXPECT_EQ(tape.grad(a).dims(), a.dims());
  EXPECT_EQ(tape.grad(w).dims(), w.dims());
}

TEST(Backward, FanOutGradientsAreSummed) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({2}));
  tape.backward(add(mul(x, x), scale(x, 3.0)));  // d/dx (x^2 + 3x) = 2x + 3
  EXPECT_DOUBLE_EQ(tape.grad(x)[0], 7.0);
}

TEST(Backward, ResidualAddDistributesGradient) {
  Rng rng(9);
  const Tensor w = random_tensor(rng, {4, 4});
  auto f = [&](const auto& x) {
    return sum_all(mul(add(x, gelu(matmul(x, lift(w, x)))), x));
  };
  EXPECT_LE(finite_diff_check(f, random_tensor(rng, {3, 4})), 1e-6);
}

TEST(Backward, UnreachableLeafHasZeroGradient) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1, 2}));
  Var unused = tape.leaf(Tensor::vector({5}));
  tape.backward(sum_all(x));
  EXPECT_EQ(tape.grad(unused), Tensor::vector({0}));
}

TEST(Backward, NodesAreTopologicallyOrdered) {
  Tape tape;
  Var a = tape.leaf(Tensor::vector({1}));
  Var b = add(a, a);
  Var c = mul(b, a);
  EXPECT_LT(a.id, b.id);
  EXPECT_LT(b.id, c.id);
}

TEST(Backward, MixerLayerLossMatchesFiniteDifferences) {
  Rng rng(10);
  auto p = init_mixer_layer(rng, 4, 8, 6, 16);
  randomize(p, rng, -1.0, 1.0);
  const Tensor x = random_tensor(rng, {4, 8});
  const double err = params_gradcheck<MixerLayerParams>(p, [&](const auto& q) {
    auto y = mixer_layer(lift(x, q.f1.weight), q);
    return sum_all(mul(y, y));
  });
  EXPECT_LE(err, 1e-4);
}

// --- finite_diff_check -----------------------------------------------------

TEST(FiniteDiff, SumOfSquares) {
  Rng rng(11);
  auto f = [](const auto& x) { return sum_all(mul(x, x)); };
  EXPECT_LT(finite_diff_check(f, random_tensor(rng, {3, 3})), 1e-8);
}

TEST(FiniteDiff, GeluSum) {
  auto f = [](const auto& x) { return sum_all(gelu(x)); };
  EXPECT_LT(finite_diff_check(f, Tensor::vector({0.5})), 1e-6);
}

TEST(FiniteDiff, SoftmaxCrossEntropy) {
  Rng rng(12);
  auto f = [](const auto& x) { return cross_entropy(reshape(x, Dims{4}), 2); };
  EXPECT_LT(finite_diff_check(f, random_tensor(rng, {1, 4})), 1e-6);
}

TEST(FiniteDiff, NonFiniteObjectiveIsDomainError) {
  const Unary blowup{[](double v) { return v > 0 ? INFINITY : v; },
                     [](double) { return 1.0; }, 1};
  auto f = [&](const auto& x) { return sum_all(map(x, blowup)); };
  EXPECT_THROW(finite_diff_check(f, Tensor::vector({1.0})), DomainError);
}

TEST(FiniteDiff, RejectsNonPositiveStep) {
  auto f = [](const auto& x) { return sum_all(x); };
  EXPECT_THROW(finite_diff_check(f, Tensor::vector({1.0}), 0.0), DomainError);
}

TEST(FiniteDiff, OpsAtRandomPoints) {
  // Ten draws per op with entries in [-1, 1].
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    const Tensor x = random_tensor(rng, {3, 4});
    const Tensor b = random_tensor(rng, {4, 3});
    const Tensor c = random_tensor(rng, {3, 4});
    EXPECT_LE(finite_diff_check([&](const auto& v) {
                return sum_all(mul(matmul(v, lift(b, v)), matmul(v, lift(b, v))));
              }, x), 1e-4);
    EXPECT_LE(finite_diff_check([&](const auto& v) {
                return sum_all(mul(transpose(v), lift(transpose(c), v)));
              }, x), 1e-4);
    EXPECT_LE(finite_diff_check([&](const auto& v) {
                return sum_all(mul(sub(v, lift(c, v)), add(v, 0.3)));
              }, x), 1e-4);
    for (Axis axis : {Axis::rows, Axis::cols})
      for (Stat stat : {Stat::sum, Stat::mean, Stat::var}) {
        EXPECT_LE(finite_diff_check([&](const auto& v) {
                    auto r = reduce(v, axis, stat);
                    return sum_all(mul(r, r));
                  }, x), 1e-4);
      }
  }
}

// --- flop counter ------------------------------------------------------------

TEST(FlopCounter, CountsMatmulAsTwoPerMac) {
  FlopScope scope;
  matmul(Tensor({2, 3}), Tensor({3, 4}));
  EXPECT_EQ(scope.count(), 2u * 2 * 3 * 4);
}

TEST(FlopCounter, IsPerThread) {
  FlopScope scope;
  std::thread([] { matmul(Tensor({5, 5}), Tensor({5, 5})); }).join();
  EXPECT_EQ(scope.count(), 0u);
}

// --- rng -------------------------------------------------------------------

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Rng, UniformInRange) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(-2.0, 3.0);
    ASSERT_GE(u, -2.0);
    ASSERT_LT(u, 3.0);
    ASSERT_LT(rng.below(7), 7u);
  }
}

}  // namespace
}  // namespace linmix

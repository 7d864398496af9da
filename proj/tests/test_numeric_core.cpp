#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tckae/finite_diff.hpp"
#include "tckae/losses.hpp"
#include "tckae/matrix.hpp"
#include "tckae/model.hpp"
#include "tckae/tape.hpp"

using namespace tckae;

namespace {

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST(Matrix, ColumnMajorLayout) {
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  const std::vector<double> expect{1, 4, 2, 5, 3, 6};
  EXPECT_TRUE(std::equal(m.data().begin(), m.data().end(), expect.begin()));
}

TEST(Matrix, IdentityTimesA) {
  std::mt19937_64 rng(1);
  const Matrix a = oracle::random_matrix(3, 4, rng);
  EXPECT_EQ(matmul(Matrix::identity(3), a), a);
}

TEST(Matrix, RotationSquared) {
  const Matrix r = Matrix::from_rows({{0, 1}, {-1, 0}});
  EXPECT_EQ(matmul(r, r), Matrix::from_rows({{-1, 0}, {0, -1}}));
}

TEST(Matrix, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(2);
  const Matrix a = oracle::random_matrix(5, 4, rng);
  const Matrix b = oracle::random_matrix(4, 3, rng);
  const Matrix got = matmul(a, b);
  const Matrix ref = oracle::naive_matmul(a, b);
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_LE(std::abs(got.data()[i] - ref.data()[i]), 1e-13 * std::max(1.0, std::abs(ref.data()[i])));
  }
}

TEST(Matrix, TransposedProductsMatchExplicitTranspose) {
  std::mt19937_64 rng(3);
  const Matrix a = oracle::random_matrix(4, 3, rng);
  const Matrix b = oracle::random_matrix(5, 3, rng);
  const Matrix c = oracle::random_matrix(4, 2, rng);
  EXPECT_LT(max_abs_diff(matmul_nt(a, b), oracle::naive_matmul(a, transpose(b))), 1e-14);
  EXPECT_LT(max_abs_diff(matmul_tn(a, c), oracle::naive_matmul(transpose(a), c)), 1e-14);
}

TEST(Matrix, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
  EXPECT_THROW(Matrix(2, 2) + Matrix(2, 3), DimensionError);
  EXPECT_THROW(add_bias(Matrix(3, 2), Matrix(2, 1)), DimensionError);
}

TEST(MatPowApply, ZeroPowerIsIdentity) {
  const Matrix z = Matrix::column({1.5, -2.0});
  EXPECT_EQ(mat_pow_apply(Matrix::from_rows({{3, 1}, {0, 2}}), z, 0), z);
}

TEST(MatPowApply, QuarterTurnTwice) {
  const Matrix k = Matrix::from_rows({{0, 1}, {-1, 0}});
  EXPECT_EQ(mat_pow_apply(k, Matrix::column({1, 0}), 2), Matrix::column({-1, 0}));
}

TEST(MatPowApply, MatchesRepeatedMultiplication) {
  std::mt19937_64 rng(4);
  const Matrix k = oracle::random_matrix(3, 3, rng);
  const Matrix z = oracle::random_matrix(3, 2, rng);
  Matrix ref = z;
  for (int i = 0; i < 5; ++i) ref = oracle::naive_matmul(k, ref);
  EXPECT_LT(max_abs_diff(mat_pow_apply(k, z, 5), ref), 1e-12);
}

TEST(MatPowApply, RejectsNonSquare) {
  EXPECT_THROW(mat_pow_apply(Matrix(2, 3), Matrix(3, 1), 1), DimensionError);
}

TEST(Tanh, OddAndSaturating) {
  const Matrix y = tanh_map(Matrix::column({0.0, 40.0, -40.0}));
  EXPECT_EQ(y(0, 0), 0.0);
  EXPECT_NEAR(y(1, 0), 1.0, 1e-12);
  EXPECT_NEAR(y(2, 0), -1.0, 1e-12);
}

TEST(Tanh, TapedDerivativeMatchesFiniteDifference) {
  Tape tape;
  const Var x = tape.variable(Matrix::column({0.5}));
  const Var y = tanh_map(x);
  const std::vector<double> w{1.0};
  const Var s = weighted_sum(std::span<const Var>(&y, 1), w);
  const auto g = tape.gradient(s, std::span<const Var>(&x, 1));
  const double h = 1e-6;
  const double fd = (std::tanh(0.5 + h) - std::tanh(0.5 - h)) / (2 * h);
  EXPECT_NEAR(g[0](0, 0), fd, 1e-7);
}

TEST(Tape, HalfSquaredNormGradientIsIdentity) {
  Tape tape;
  const Matrix w0 = Matrix::column({1.0, -2.0, 0.5});
  const Var w = tape.variable(w0);
  const Var f = scale(sum_squares(w), 0.5);
  EXPECT_DOUBLE_EQ(f.scalar(), 0.5 * (1 + 4 + 0.25));
  const auto g = tape.gradient(f, std::span<const Var>(&w, 1));
  EXPECT_EQ(g[0], w0);
}

TEST(Tape, LinearResidualGradientMatchesHandDerivation) {
  const Matrix k0 = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix z0 = Matrix::column({0.5, -1.0});
  const Matrix y0 = Matrix::column({1.0, 2.0});
  Tape tape;
  const Var k = tape.variable(k0);
  const Var f = sum_squares(matmul(k, tape.constant(z0)) - tape.constant(y0));
  const auto g = tape.gradient(f, std::span<const Var>(&k, 1));
  // Kz - y = (1*0.5 + 2*-1 - 1, 3*0.5 + 4*-1 - 2) = (-2.5, -4.5); grad = 2 r z^T
  const Matrix expect = Matrix::from_rows({{2 * -2.5 * 0.5, 2 * -2.5 * -1.0}, {2 * -4.5 * 0.5, 2 * -4.5 * -1.0}});
  EXPECT_EQ(g[0], expect);
}

TEST(Tape, UnusedVariableGetsZeroGradient) {
  Tape tape;
  const Var a = tape.variable(Matrix::column({1.0, 2.0}));
  const Var b = tape.variable(Matrix(2, 2, 3.0));
  const Var f = sum_squares(a);
  const std::vector<Var> wrt{a, b};
  const auto g = tape.gradient(f, wrt);
  EXPECT_EQ(g[1], Matrix(2, 2));
}

TEST(Tape, SharedSubexpressionAccumulates) {
  // f = sum((a + a)^2) = 4 sum(a^2) -> grad 8a
  Tape tape;
  const Matrix a0 = Matrix::column({1.0, -3.0});
  const Var a = tape.variable(a0);
  const Var f = sum_squares(a + a);
  const auto g = tape.gradient(f, std::span<const Var>(&a, 1));
  EXPECT_EQ(g[0], 8.0 * a0);
}

TEST(Tape, SweepVisitsNodesInReverseCreationOrder) {
  Tape tape;
  const Var a = tape.variable(Matrix::column({1.0}));
  const Var b = tanh_map(a);
  const Var c = sum_squares(b);
  tape.gradient(c, std::span<const Var>(&a, 1));
  const auto& order = tape.last_sweep();
  ASSERT_FALSE(order.empty());
  EXPECT_EQ(order.front(), c.id);
  for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LT(order[i], order[i - 1]);
}

TEST(Tape, GradientRequiresScalarOutput) {
  Tape tape;
  const Var a = tape.variable(Matrix::column({1.0, 2.0}));
  EXPECT_THROW(tape.gradient(a, std::span<const Var>(&a, 1)), DimensionError);
}

TEST(Tape, FrobeniusNormSubgradientAtZero) {
  Tape tape;
  const Var a = tape.variable(Matrix(2, 2));
  const Var f = frobenius_norm(a);
  const auto g = tape.gradient(f, std::span<const Var>(&a, 1));
  EXPECT_EQ(g[0], Matrix(2, 2));
  EXPECT_TRUE(all_finite(g[0]));
}

// Every primitive against central differences on random inputs in [-1, 1].
TEST(Tape, EveryPrimitiveMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  const Matrix a0 = oracle::random_matrix(3, 4, rng);
  const Matrix b0 = oracle::random_matrix(4, 2, rng);
  const Matrix c0 = oracle::random_matrix(3, 1, rng);
  const Matrix k0 = oracle::random_matrix(3, 3, rng);
  const std::vector<double> col_w{0.3, 1.0, 0.5, 2.0};

  auto build = [&](Tape& t, const std::vector<Matrix>& p) {
    const Var a = t.variable(p[0]);
    const Var b = t.variable(p[1]);
    const Var c = t.variable(p[2]);
    const Var k = t.variable(p[3]);
    const Var ab = matmul(a, b);                               // 3x2
    const Var biased = add_bias(tanh_map(ab), c);              // 3x2
    const Var pw = mat_pow_apply(k, biased, 3);                // 3x2
    const Var diff = pw - scale(biased, 0.7);
    const std::array<Var, 2> parts{col_block(a, 1, 2), diff};  // 3x4
    const Var cat = hcat(parts);
    const Var s1 = weighted_col_sum_squares(cat, col_w);
    const Var s2 = frobenius_norm(row_block(a + a, 1, 2));
    const Var s3 = sum_squares(k);
    const std::array<Var, 3> ss{s1, s2, s3};
    const std::array<double, 3> ws{0.5, 1.5, -0.25};
    return std::make_pair(weighted_sum(ss, ws), std::vector<Var>{a, b, c, k});
  };

  const std::vector<Matrix> p0{a0, b0, c0, k0};
  Tape tape;
  auto [out, vars] = build(tape, p0);
  const auto analytic = tape.gradient(out, vars);
  const auto numeric = finite_diff_gradient(
      [&](const std::vector<Matrix>& p) {
        Tape t;
        return build(t, p).first.scalar();
      },
      p0);
  EXPECT_LT(max_relative_error(analytic, numeric), 1e-5);
}

TEST(FiniteDiff, LinearFunctionIsExact) {
  const auto g = finite_diff_gradient(
      [](const std::vector<Matrix>& p) { return 3.0 * p[0](0, 0) - 2.0 * p[0](1, 0); },
      {Matrix::column({0.25, 0.5})});
  EXPECT_NEAR(g[0](0, 0), 3.0, 1e-9);
  EXPECT_NEAR(g[0](1, 0), -2.0, 1e-9);
}

TEST(FiniteDiff, CubicAtTwo) {
  const double h = 1e-4;
  const auto g = finite_diff_gradient(
      [](const std::vector<Matrix>& p) { return std::pow(p[0](0, 0), 3); }, {Matrix::column({2.0})}, h);
  // central difference error for w^3 is exactly h^2
  EXPECT_NEAR(g[0](0, 0), 12.0, 2 * h * h);
}

TEST(FiniteDiff, AgreesWithTapeOnIdentityLoss) {
  const KoopmanAutoencoder m = init_model({5, 7, 3}, 11);
  std::mt19937_64 rng(6);
  const Batch b{oracle::random_matrix(5, 4, rng), 4, 0};

  Tape tape;
  const TapedModel tm = bind(tape, m);
  const Var l = loss_id(tm, tape.constant(b.window), b.m);
  const auto analytic = tape.gradient(l, tm.params);

  std::vector<Matrix> p0;
  for (const Matrix* p : m.parameters()) p0.push_back(*p);
  const auto numeric = finite_diff_gradient(
      [&](const std::vector<Matrix>& p) {
        KoopmanAutoencoder mm = m;
        auto ptrs = mm.parameters();
        for (std::size_t i = 0; i < p.size(); ++i) *ptrs[i] = p[i];
        return loss_id(mm, b);
      },
      p0);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    EXPECT_LT(max_abs_diff(analytic[i], numeric[i]), 1e-6) << "parameter " << i;
  }
}

TEST(FiniteDiff, FullLossGradientOnTinyModel) {
  KoopmanAutoencoder m = init_model({4, 6, 3}, 3);
  // Move K and K_b away from the identity so every term has a non-trivial gradient.
  std::mt19937_64 rng(7);
  m.k_fwd = m.k_fwd + oracle::random_matrix(3, 3, rng, -0.2, 0.2);
  m.k_bwd = m.k_bwd + oracle::random_matrix(3, 3, rng, -0.2, 0.2);
  LossWeights w;
  w.gamma_id = 1.0;
  w.gamma_fwd = 0.5;
  w.gamma_bwd = 0.3;
  w.gamma_con = 0.2;
  w.gamma_tc = 0.7;
  w.k_max_fwd = 2;
  w.kappa_max_tc = 2;
  const std::size_t batch = 4;
  const Batch b{oracle::random_matrix(4, batch + w.k_max_fwd, rng), batch, 0};

  Tape tape;
  const TapedModel tm = bind(tape, m);
  const TapedLoss tl = loss_total(tm, tape.constant(b.window), batch, w);
  const auto analytic = tape.gradient(tl.total, tm.params);

  std::vector<Matrix> p0;
  for (const Matrix* p : m.parameters()) p0.push_back(*p);
  const auto numeric = finite_diff_gradient(
      [&](const std::vector<Matrix>& p) {
        KoopmanAutoencoder mm = m;
        auto ptrs = mm.parameters();
        for (std::size_t i = 0; i < p.size(); ++i) *ptrs[i] = p[i];
        return loss_total(mm, b, w).total;
      },
      p0);
  EXPECT_LT(max_relative_error(analytic, numeric), 1e-5);
}

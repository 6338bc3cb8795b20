#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scert/interp.hpp"
#include "scert/linalg.hpp"

using namespace scert;

TEST(ChooseTau, Values) {
  EXPECT_NEAR(choose_tau(1.0, 0.25, 2.0), 0.5, 1e-15);
  EXPECT_NEAR(choose_tau(2.0, 0.5, 2.0), 1.0, 1e-15);
  EXPECT_EQ(choose_tau(5.0, 0.3, 0.0), 0.3);
}

TEST(ThresholdDecompose, Diagonal) {
  const Decomposition d = threshold_decompose(Matrix::diag({5.0, 1.0, 0.1}), 0.5);
  EXPECT_EQ(d.kept_rank, 2);
  EXPECT_LT((d.low_rank_part - Matrix::diag({5.0, 1.0, 0.0})).frobenius(), 1e-12);
  EXPECT_LT((d.residual_part - Matrix::diag({0.0, 0.0, 0.1})).frobenius(), 1e-12);
}

TEST(ThresholdDecompose, ZeroThresholdKeepsAll) {
  std::mt19937_64 rng(31);
  const Matrix z = Matrix::gaussian(4, 3, rng);
  const Decomposition d = threshold_decompose(z, 0.0);
  EXPECT_EQ(d.kept_rank, 3);
  EXPECT_LT((d.low_rank_part - z).frobenius(), 1e-12);
  EXPECT_LT(d.residual_part.frobenius(), 1e-12);
}

TEST(ThresholdDecompose, MarkovCount) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 100; ++k) {
    Matrix z = Matrix::gaussian(5, 4, rng);
    z *= 3.0 / schatten_qnorm(z, Matrix(5, 4), 1.0);
    const Decomposition d = threshold_decompose(z, 1.0);
    EXPECT_LE(d.kept_rank, 3);
    EXPECT_LT((d.low_rank_part + d.residual_part - z).frobenius(), 1e-12);
  }
}

TEST(CoverFormula, LowRank) {
  EXPECT_NEAR(cover_formula_lowrank(1, 1, 1, 0.5, 0.5), 2.0 * std::log(7.0), 1e-12);
  EXPECT_EQ(cover_formula_lowrank(3, 3, 0, 1, 0.1), 0.0);
  EXPECT_NEAR(cover_formula_lowrank(2, 3, 1, 1, 0.5), 5.0 * std::log(13.0), 1e-12);
}

TEST(CoverFormula, Frobenius) {
  EXPECT_NEAR(cover_formula_frobenius(1, 1, 1, 1, 1), 36.0 * std::log2(15.0), 1e-9);
  EXPECT_EQ(cover_formula_frobenius(0, 1, 1, 1, 1), 0.0);
  EXPECT_NEAR(cover_formula_frobenius(2, 1, 1, 2, 3), 144.0 * std::log2(138.0), 1e-9);
}

TEST(CoverFormula, SchattenLimitAtZero) {
  SchattenClassSpec s;
  s.m = 3;
  s.d = 3;
  s.spec_bound = 1.0;
  s.sample_bound = 1.0;
  s.qnorm_bound = 1.0;
  s.p = 1e-4;
  const double near = cover_formula_schatten_inf(s, 1.0);
  s.p = 0.0;
  const double at = cover_formula_schatten_inf(s, 1.0);
  EXPECT_NEAR(near, at, 0.05 * at);
}

TEST(CoverFormula, SchattenInfScalarCase) {
  SchattenClassSpec s;
  s.p = 2.0;
  s.qnorm_bound = 1.5;
  s.spec_bound = 2.0;
  s.sample_bound = 1.0;
  s.sample_count = 3;
  const double eps = 0.5;
  const double lead = 24.0 * (1.5 / eps) * std::sqrt(2.0);
  const double gamma = (16.0 * (1.5 * 1.5 + 1.0) * 2.0 * 3.0 * 2.0 / std::sqrt(eps) + 7.0) * 3.0;
  EXPECT_NEAR(cover_formula_schatten_inf(s, eps), lead * std::log2(gamma), 1e-9);
}

TEST(CoverFormula, L2DominatesInf) {
  SchattenClassSpec s;
  s.m = 4;
  s.d = 3;
  s.p = 1.0;
  s.qnorm_bound = 2.0;
  s.sample_count = 5;
  EXPECT_GT(cover_formula_schatten_l2(s, 0.4), cover_formula_schatten_inf(s, 0.4));
  s.m = 1;
  EXPECT_GE(cover_formula_schatten_l2(s, 0.4), cover_formula_schatten_inf(s, 0.4));
}

TEST(CoverFormula, ConvSingleChannelSinglePatch) {
  SchattenClassSpec s;
  s.m = 1;
  s.d = 3;
  s.p = 1.0;
  s.qnorm_bound = 2.0;
  s.sample_count = 5;
  EXPECT_NEAR(cover_formula_conv(s, 1, 0.4), cover_formula_schatten_inf(s, 0.4), 1e-9);
}

TEST(EmpiricalCover, Trivial) {
  const Matrix data(2, 2, {1.0, 0.0, 0.0, 1.0});
  EXPECT_EQ(empirical_cover_estimate({Matrix(1, 2)}, data, 0.1, CoverNorm::linf), 1u);
  const std::vector<Matrix> grid = {Matrix(1, 2), Matrix(1, 2, {0.1, 0.1})};
  EXPECT_EQ(empirical_cover_estimate(grid, data, 1.0, CoverNorm::linf), 1u);
  EXPECT_EQ(empirical_cover_estimate(grid, data, 0.05, CoverNorm::linf), 2u);
}

TEST(ClassGrid, RespectsConstraints) {
  SchattenClassSpec s;
  s.m = 1;
  s.d = 2;
  s.p = 1.0;
  s.qnorm_bound = 1.0;
  s.spec_bound = 1.0;
  const auto grid = schatten_class_grid(s, 0.5);
  EXPECT_FALSE(grid.empty());
  for (const Matrix& z : grid) EXPECT_LE(schatten_qnorm(z, Matrix(1, 2), 1.0), 1.0 + 1e-12);
}

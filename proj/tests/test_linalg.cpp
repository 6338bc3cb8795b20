#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scert/linalg.hpp"

using namespace scert;

namespace {

// Roots of det(λI − M) for symmetric 3×3 M by sign scanning and bisection.
std::vector<double> eig3_charpoly(const Matrix& m) {
  const double tr = m(0, 0) + m(1, 1) + m(2, 2);
  const double c2 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) + m(1, 1) * m(2, 2) -
                    m(1, 2) * m(2, 1);
  const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                     m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
  auto f = [&](double x) { return ((x - tr) * x + c2) * x - det; };
  std::vector<double> roots;
  const int steps = 200000;
  const double hi = tr + 1.0, lo = -1e-9;
  double prev = lo, fprev = f(lo);
  for (int k = 1; k <= steps; ++k) {
    const double x = lo + (hi - lo) * k / steps;
    const double fx = f(x);
    if ((fprev <= 0.0) != (fx <= 0.0)) {
      double a = prev, b = x;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if ((f(a) <= 0.0) == (f(mid) <= 0.0)) a = mid; else b = mid;
      }
      roots.push_back(0.5 * (a + b));
    }
    prev = x;
    fprev = fx;
  }
  std::sort(roots.rbegin(), roots.rend());
  return roots;
}

}  // namespace

TEST(Svd, DiagonalSortsDescending) {
  const auto s = singular_values(Matrix::diag({3.0, 4.0}));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_NEAR(s[0], 4.0, 1e-14);
  EXPECT_NEAR(s[1], 3.0, 1e-14);
}

TEST(Svd, ZeroMatrix) {
  const auto s = singular_values(Matrix(2, 3));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 0.0);
}

TEST(Svd, MatchesCharacteristicPolynomialOfGram) {
  std::mt19937_64 rng(42);
  const Matrix a = Matrix::gaussian(4, 3, rng);
  const auto s = singular_values(a);
  const auto ev = eig3_charpoly(matmul_tn(a, a));
  ASSERT_EQ(ev.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s[i], std::sqrt(ev[i]), 1e-8);
}

TEST(Svd, ReconstructsAndIsOrthonormal) {
  std::mt19937_64 rng(7);
  for (auto [m, n] : {std::pair{5, 3}, std::pair{3, 5}, std::pair{4, 4}}) {
    const Matrix a = Matrix::gaussian(m, n, rng);
    const SvdResult s = svd(a);
    EXPECT_LT((reconstruct(s) - a).frobenius(), 1e-12 * a.frobenius());
    const Matrix utu = matmul_tn(s.left, s.left);
    EXPECT_LT((utu - Matrix::identity(utu.rows())).frobenius(), 1e-12);
    const Matrix vvt = matmul_nt(s.right_t, s.right_t);
    EXPECT_LT((vvt - Matrix::identity(vvt.rows())).frobenius(), 1e-12);
  }
}

TEST(Svd, RankDeficientWithTinyColumnsConverges) {
  std::mt19937_64 rng(3);
  Matrix a = matmul(Matrix::gaussian(5, 1, rng), Matrix::gaussian(1, 5, rng));
  a(4, 4) += 1e-170;
  const auto s = singular_values(a);
  EXPECT_GT(s[0], 0.0);
  EXPECT_LT(s[1], 1e-12 * s[0]);
}

TEST(Svd, RejectsNonFinite) {
  Matrix a(2, 2);
  a(0, 1) = std::nan("");
  EXPECT_THROW(svd(a), std::invalid_argument);
}

TEST(SpectralNorm, Identity) { EXPECT_NEAR(spectral_norm(Matrix::identity(5)), 1.0, 1e-12); }

TEST(SpectralNorm, Diagonal) { EXPECT_NEAR(spectral_norm(Matrix::diag({0.1, 7.0})), 7.0, 1e-10); }

TEST(SpectralNorm, MatchesSvd) {
  std::mt19937_64 rng(11);
  const Matrix a = Matrix::gaussian(6, 4, rng);
  EXPECT_NEAR(spectral_norm(a), singular_values(a)[0], 1e-8);
}

TEST(SpectralNorm, AllOnesStartInKernel) {
  // (1,1) lies in the kernel; the deterministic perturbation must still find σ = √2.
  const Matrix a(1, 2, {1.0, -1.0});
  EXPECT_NEAR(spectral_norm(a), std::sqrt(2.0), 1e-10);
}

TEST(Schatten, IdentityHalf) { EXPECT_NEAR(schatten_qnorm(Matrix::identity(3), Matrix(3, 3), 0.5), 9.0, 1e-12); }

TEST(Schatten, FrobeniusAtTwo) { EXPECT_NEAR(schatten_qnorm(Matrix::diag({3.0, 4.0}), Matrix(2, 2), 2.0), 5.0, 1e-12); }

TEST(Schatten, NuclearAtOne) {
  EXPECT_NEAR(schatten_qnorm(Matrix::diag({5.0, 1.0, 0.1}), Matrix(3, 3), 1.0), 6.1, 1e-12);
}

TEST(Schatten, PowerZeroIsRank) {
  EXPECT_EQ(schatten_qnorm_p_power(Matrix::diag({5.0, 1.0, 0.0}), Matrix(3, 3), 0.0), 2.0);
}

TEST(Schatten, UsesReference) {
  const Matrix a = Matrix::diag({3.0, 4.0});
  EXPECT_NEAR(schatten_qnorm(a, a, 1.0), 0.0, 1e-15);
}

TEST(Schatten, RejectsIndexOutsideRange) {
  EXPECT_THROW(schatten_qnorm(Matrix::identity(2), Matrix(2, 2), 2.5), std::domain_error);
  EXPECT_THROW(schatten_qnorm(Matrix::identity(2), Matrix(2, 2), -0.1), std::domain_error);
}

TEST(MixedNorms, TwoOneTranspose) {
  EXPECT_NEAR(norm_2_1_transpose(Matrix::identity(2)), 2.0, 1e-15);
  EXPECT_NEAR(norm_2_1_transpose(Matrix(2, 2, {3.0, 0.0, 4.0, 0.0})), 5.0, 1e-15);
  std::mt19937_64 rng(5);
  const Matrix a = Matrix::gaussian(3, 3, rng);
  double naive = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 3; ++r) s += a(r, c) * a(r, c);
    naive += std::sqrt(s);
  }
  EXPECT_NEAR(norm_2_1_transpose(a), naive, 1e-12);
}

TEST(MixedNorms, TwoInfTranspose) {
  EXPECT_NEAR(norm_2_inf_transpose(Matrix::identity(4)), 1.0, 1e-15);
  EXPECT_NEAR(norm_2_inf_transpose(Matrix(2, 3, {1.0, 2.0, 2.0, 0.0, 0.0, 0.0})), 3.0, 1e-15);
  std::mt19937_64 rng(6);
  const Matrix a = Matrix::gaussian(5, 2, rng);
  double naive = 0.0;
  for (std::size_t r = 0; r < 5; ++r) naive = std::max(naive, std::hypot(a(r, 0), a(r, 1)));
  EXPECT_NEAR(norm_2_inf_transpose(a), naive, 1e-12);
}

TEST(NumericRank, Cases) {
  EXPECT_EQ(numeric_rank(Matrix(3, 3)), 0);
  EXPECT_EQ(numeric_rank(Matrix::diag({1.0, 1e-14}), 1e-8), 1);
  std::mt19937_64 rng(8);
  EXPECT_EQ(numeric_rank(matmul(Matrix::gaussian(4, 2, rng), Matrix::gaussian(2, 5, rng)), 1e-8), 2);
}

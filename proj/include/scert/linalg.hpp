#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scert/matrix.hpp"

namespace scert {

inline constexpr double kDefaultRankTol = 1e-8;

struct SvdResult {
  Matrix left;                   // m × k, orthonormal columns
  std::vector<double> singulars; // descending, k = min(m, n)
  Matrix right_t;                // k × n, orthonormal rows
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One-sided Jacobi SVD. Throws ConvergenceError if the sweep cap is hit.
SvdResult svd(const Matrix& a);
std::vector<double> singular_values(const Matrix& a);
Matrix reconstruct(const SvdResult& s);

struct PowerOptions {
  double rel_tol = 1e-10;
  int max_iter = 10000;
};

// Largest singular value of the linear map x -> apply(x) by power iteration on the
// normal operator. apply maps R^n_in to R^n_out, adjoint maps back.
double operator_norm_power(const std::function<std::vector<double>(const std::vector<double>&)>& apply,
                           const std::function<std::vector<double>(const std::vector<double>&)>& adjoint,
                           std::size_t n_in, PowerOptions opt = {});

double spectral_norm(const Matrix& a, PowerOptions opt = {});

double schatten_p_power_from_singulars(const std::vector<double>& s, double p, double rank_tol = kDefaultRankTol);
double schatten_qnorm(const Matrix& a, const Matrix& m_ref, double p, double rank_tol = kDefaultRankTol);
double schatten_qnorm_p_power(const Matrix& a, const Matrix& m_ref, double p, double rank_tol = kDefaultRankTol);

// Σ over columns of a of their Euclidean norms, i.e. ‖aᵀ‖_{2,1}.
double norm_2_1_transpose(const Matrix& a);
// Maximum Euclidean row norm of a.
double norm_2_inf_transpose(const Matrix& a);

int rank_from_singulars(const std::vector<double>& s, double rank_tol = kDefaultRankTol);
int numeric_rank(const Matrix& a, double rank_tol = kDefaultRankTol);

}  // namespace scert

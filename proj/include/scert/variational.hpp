#pragma once

#include <cstdint>
#include <vector>

#include "scert/matrix.hpp"

namespace scert {

// Product B_L ⋯ B_1 for factors stored in application order (B_1 first).
Matrix chain_product(const std::vector<Matrix>& factors);
double weight_decay_objective(const std::vector<Matrix>& factors);
double weighted_schatten_objective(const std::vector<Matrix>& factors, const std::vector<double>& p_list);
double conjugate_index(const std::vector<double>& p_list);

std::vector<Matrix> balanced_factorization(const Matrix& a, int L, std::size_t width);
std::vector<Matrix> balanced_factorization_schatten(const Matrix& a, const std::vector<double>& p_list);

struct DescentOptions {
  int seeds = 8;
  double lambda_start = 32.0;
  double lambda_end = 1e4;
  int sweeps_per_stage = 500;
  double jitter = 0.1;  // entrywise noise added between stages, on the ‖A‖_F = 1 scale
  std::uint64_t base_seed = 12345;
};

// Best feasible Σ‖B_ℓ‖_F² found by block-coordinate descent on the penalized objective
// Σ‖B_ℓ‖_F² + λ‖B_L⋯B_1 − A‖_F² over an increasing λ schedule, from several random starts.
// Throws std::runtime_error when no start reaches feasibility.
double descent_factorization_oracle(const Matrix& a, int L, std::size_t width, DescentOptions opt = {});

}  // namespace scert

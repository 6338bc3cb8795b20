#pragma once

#include <cstddef>
#include <vector>

#include "scert/matrix.hpp"

namespace scert {

// Class {Z ∈ R^{m×d} : ‖Z−M‖_{S,p} ≤ qnorm_bound, ‖Z‖ ≤ spec_bound} on samples with ‖x_i‖ ≤ sample_bound.
// At p = 0, qnorm_bound is read as a rank bound.
struct SchattenClassSpec {
  std::size_t m = 1;
  std::size_t d = 1;
  double p = 1.0;
  double qnorm_bound = 1.0;
  double spec_bound = 1.0;
  double sample_bound = 1.0;
  std::size_t sample_count = 1;

  void validate() const;
};

struct Decomposition {
  Matrix low_rank_part;
  Matrix residual_part;
  double threshold = 0.0;
  int kept_rank = 0;
};

double choose_tau(double qnorm_bound, double eps, double p);
Decomposition threshold_decompose(const Matrix& z, double tau);

double cover_formula_lowrank(double m, double d, double r, double s, double eps);
double cover_formula_frobenius(double a, double b, double eps, double m, double n);
double cover_formula_schatten_inf(const SchattenClassSpec& spec, double eps);
double cover_formula_schatten_l2(const SchattenClassSpec& spec, double eps);
// Convolutional layer: spec.m plays U′ (output channels), spec.d the patch size,
// spec.sample_count N; patch_count is O.
double cover_formula_conv(const SchattenClassSpec& spec, std::size_t patch_count, double eps);

enum class CoverNorm { linf, l2 };

// Greedy internal cover of an explicit finite class at output radius eps, measured as
// max over samples of ‖(Z − Z′)x_i‖ in the chosen norm. Samples are rows of dataset.
std::size_t empirical_cover_estimate(const std::vector<Matrix>& class_grid, const Matrix& dataset, double eps,
                                     CoverNorm norm);

// Lattice discretization of a SchattenClassSpec (reference M = 0): entries on step·Z within
// the box implied by the constraints, filtered by both norm constraints.
std::vector<Matrix> schatten_class_grid(const SchattenClassSpec& spec, double step, std::size_t max_size = 1000000);

}  // namespace scert

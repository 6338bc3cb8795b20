#include "scert/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "scert/linalg.hpp"
#include "scert/parallel.hpp"

namespace scert {

Matrix chain_product(const std::vector<Matrix>& factors) {
  if (factors.empty()) throw std::invalid_argument("chain_product: no factors");
  Matrix p = factors[0];
  for (std::size_t i = 1; i < factors.size(); ++i) p = matmul(factors[i], p);
  return p;
}

double weight_decay_objective(const std::vector<Matrix>& factors) {
  double s = 0.0;
  for (const auto& f : factors) {
    const double n = f.frobenius();
    s += n * n;
  }
  return s;
}

double conjugate_index(const std::vector<double>& p_list) {
  double inv = 0.0;
  for (double p : p_list) inv += 1.0 / p;
  return 1.0 / inv;
}

double weighted_schatten_objective(const std::vector<Matrix>& factors, const std::vector<double>& p_list) {
  if (factors.size() != p_list.size()) throw std::invalid_argument("weighted_schatten_objective: length mismatch");
  const double p = conjugate_index(p_list);
  double s = 0.0;
  for (std::size_t i = 0; i < factors.size(); ++i)
    s += p / p_list[i] * schatten_p_power_from_singulars(singular_values(factors[i]), p_list[i]);
  return s;
}

namespace {

// Factors B_1 = diag(σ^{e_1})Vᵀ, middle diag(σ^{e_ℓ}), B_L = U diag(σ^{e_L}), padded to width.
std::vector<Matrix> factor_with_exponents(const Matrix& a, const std::vector<double>& exps, std::size_t width) {
  const SvdResult s = svd(a);
  const std::size_t k = s.singulars.size();
  const std::size_t C = a.rows(), d = a.cols();
  const std::size_t L = exps.size();
  if (L == 1) return {a};
  auto powered = [&](double e) {
    std::vector<double> v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = s.singulars[i] > 0.0 ? std::pow(s.singulars[i], e) : 0.0;
    return v;
  };
  std::vector<Matrix> out;
  {
    const auto sg = powered(exps[0]);
    Matrix b(width, d);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t c = 0; c < d; ++c) b(i, c) = sg[i] * s.right_t(i, c);
    out.push_back(std::move(b));
  }
  for (std::size_t l = 1; l + 1 < L; ++l) {
    const auto sg = powered(exps[l]);
    Matrix b(width, width);
    for (std::size_t i = 0; i < k; ++i) b(i, i) = sg[i];
    out.push_back(std::move(b));
  }
  {
    const auto sg = powered(exps[L - 1]);
    Matrix b(C, width);
    for (std::size_t r = 0; r < C; ++r)
      for (std::size_t i = 0; i < k; ++i) b(r, i) = s.left(r, i) * sg[i];
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::vector<Matrix> balanced_factorization(const Matrix& a, int L, std::size_t width) {
  if (L < 1) throw std::invalid_argument("balanced_factorization: L must be at least 1");
  if (L > 1 && width < std::min(a.rows(), a.cols())) throw std::invalid_argument("balanced_factorization: width too small");
  return factor_with_exponents(a, std::vector<double>(static_cast<std::size_t>(L), 1.0 / L), width);
}

std::vector<Matrix> balanced_factorization_schatten(const Matrix& a, const std::vector<double>& p_list) {
  if (p_list.empty()) throw std::invalid_argument("balanced_factorization_schatten: empty p_list");
  for (double p : p_list)
    if (!(p > 0.0 && p <= 2.0)) throw std::invalid_argument("balanced_factorization_schatten: entries must lie in (0, 2]");
  const double p = conjugate_index(p_list);
  std::vector<double> exps;
  for (double pl : p_list) exps.push_back(p / pl);
  return factor_with_exponents(a, exps, std::min(a.rows(), a.cols()));
}

namespace {

double penalized_value(const Matrix& a, const std::vector<Matrix>& b, double lambda) {
  const double rn = (chain_product(b) - a).frobenius();
  return weight_decay_objective(b) + lambda * rn * rn;
}

// argmin_X ‖X‖_F² + λ‖P X Q − A‖_F², solved in the singular bases of P and Q.
Matrix block_minimizer(const Matrix& p, const Matrix& q, const Matrix& a, double lambda) {
  const SvdResult sp = svd(p), sq = svd(q);
  const Matrix at = matmul(matmul_tn(sp.left, a), sq.right_t.transpose());  // U_pᵀ A V_q
  Matrix xt(at.rows(), at.cols());
  for (std::size_t i = 0; i < at.rows(); ++i)
    for (std::size_t j = 0; j < at.cols(); ++j) {
      const double s = sp.singulars[i] * sq.singulars[j];
      xt(i, j) = lambda * s * at(i, j) / (1.0 + lambda * s * s);
    }
  return matmul(matmul_tn(sp.right_t, xt), sq.left.transpose());  // V_p X̃ U_qᵀ
}

void block_sweep(const Matrix& a, std::vector<Matrix>& b, double lambda) {
  const std::size_t L = b.size();
  for (std::size_t l = 0; l < L; ++l) {
    const Matrix q = l == 0 ? Matrix::identity(a.cols()) : chain_product({b.begin(), b.begin() + static_cast<std::ptrdiff_t>(l)});
    const Matrix p =
        l + 1 == L ? Matrix::identity(a.rows()) : chain_product({b.begin() + static_cast<std::ptrdiff_t>(l) + 1, b.end()});
    b[l] = block_minimizer(p, q, a, lambda);
  }
}

Matrix pseudo_inverse(const Matrix& q) {
  const SvdResult s = svd(q);
  const double cut = s.singulars.empty() ? 0.0 : 1e-12 * s.singulars[0];
  Matrix out(q.cols(), q.rows());
  for (std::size_t k = 0; k < s.singulars.size(); ++k) {
    if (!(s.singulars[k] > cut)) continue;
    const double inv = 1.0 / s.singulars[k];
    for (std::size_t r = 0; r < q.cols(); ++r)
      for (std::size_t c = 0; c < q.rows(); ++c) out(r, c) += s.right_t(k, r) * inv * s.left(c, k);
  }
  return out;
}

// Makes the product exact by re-solving either end factor in the minimum-norm sense, and
// reports the smaller objective among the feasible variants.
double projected_objective(const Matrix& a, const std::vector<Matrix>& b) {
  const double tol = 1e-6 * a.frobenius();
  double best = std::numeric_limits<double>::infinity();
  {
    const std::vector<Matrix> head(b.begin(), b.end() - 1);
    const Matrix q = chain_product(head);
    const Matrix last = matmul(a, pseudo_inverse(q));
    if ((matmul(last, q) - a).frobenius() <= tol)
      best = std::min(best, weight_decay_objective(head) + last.frobenius() * last.frobenius());
  }
  {
    const std::vector<Matrix> tail(b.begin() + 1, b.end());
    const Matrix p = chain_product(tail);
    const Matrix first = matmul(pseudo_inverse(p), a);
    if ((matmul(p, first) - a).frobenius() <= tol)
      best = std::min(best, weight_decay_objective(tail) + first.frobenius() * first.frobenius());
  }
  return best;
}

}  // namespace

double descent_factorization_oracle(const Matrix& a, int L, std::size_t width, DescentOptions opt) {
  if (L < 1) throw std::invalid_argument("descent_factorization_oracle: L must be at least 1");
  if (a.rows() > 8 || a.cols() > 8 || width > 8) throw std::invalid_argument("descent_factorization_oracle: dimensions above 8");
  const double an = a.frobenius();
  if (an == 0.0) return 0.0;
  if (L == 1) return an * an;
  const std::size_t C = a.rows(), d = a.cols();
  // The objective is homogeneous of degree 2/L in A, so work with ‖A‖_F = 1.
  const Matrix an_unit = a * (1.0 / an);
  const double scale = std::pow(spectral_norm(an_unit), 1.0 / L) / std::sqrt(static_cast<double>(width));

  std::vector<double> results(static_cast<std::size_t>(opt.seeds), std::numeric_limits<double>::infinity());
  parallel_for(results.size(), [&](std::size_t seed) {
    std::mt19937_64 rng(opt.base_seed + 7919 * seed);
    std::vector<Matrix> b;
    b.push_back(Matrix::gaussian(width, d, rng, scale));
    for (int l = 1; l + 1 < L; ++l) b.push_back(Matrix::gaussian(width, width, rng, scale));
    b.push_back(Matrix::gaussian(C, width, rng, scale));
    double best = std::numeric_limits<double>::infinity();
    for (double lambda = opt.lambda_start; lambda <= opt.lambda_end * (1.0 + 1e-12); lambda *= 2.0) {
      // Directions shrunk to zero at small λ are stuck there (the objective is concave at zero),
      // so every later stage starts from a jittered copy.
      if (lambda > opt.lambda_start)
        for (Matrix& f : b) f += Matrix::gaussian(f.rows(), f.cols(), rng, opt.jitter);
      double fv = penalized_value(an_unit, b, lambda);
      for (int it = 0; it < opt.sweeps_per_stage; ++it) {
        block_sweep(an_unit, b, lambda);
        const double next = penalized_value(an_unit, b, lambda);
        const bool done = fv - next <= 1e-13 * next;
        fv = next;
        if (done) break;
      }
      best = std::min(best, projected_objective(an_unit, b));
    }
    results[seed] = best;
  });
  const double best = *std::min_element(results.begin(), results.end()) * std::pow(an, 2.0 / L);
  if (!std::isfinite(best)) throw std::runtime_error("descent_factorization_oracle: no seed reached feasibility");
  return best;
}

}  // namespace scert

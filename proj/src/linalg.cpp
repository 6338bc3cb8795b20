#include "scert/linalg.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

namespace scert {

namespace {

constexpr int kMaxSweeps = 80;

// Hestenes one-sided Jacobi on a tall matrix (m >= n). Columns of u are rotated in
// place until mutually orthogonal; v accumulates the rotations.
void jacobi_tall(Matrix& u, Matrix& v) {
  const std::size_t m = u.rows(), n = u.cols();
  const double tol = static_cast<double>(m) * DBL_EPSILON;
  // Columns below rounding level of the whole matrix are treated as zero; rotating them
  // against large columns only stirs rounding noise and never settles.
  const double frob = u.frobenius();
  const double negligible = DBL_EPSILON * DBL_EPSILON * frob * frob;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
          const double ui = u(r, i), uj = u(r, j);
          alpha += ui * ui;
          beta += uj * uj;
          gamma += ui * uj;
        }
        if (alpha <= negligible || beta <= negligible) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t r = 0; r < m; ++r) {
          const double ui = u(r, i), uj = u(r, j);
          u(r, i) = c * ui - s * uj;
          u(r, j) = s * ui + c * uj;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vi = v(r, i), vj = v(r, j);
          v(r, i) = c * vi - s * vj;
          v(r, j) = s * vi + c * vj;
        }
      }
    }
    if (!rotated) return;
  }
  throw ConvergenceError("svd: Jacobi sweeps did not converge");
}

// Orthonormalize column c of q against columns [0, c); falls back to a standard
// basis vector when the column is (numerically) dependent.
void orthonormalize_column(Matrix& q, std::size_t c) {
  const std::size_t m = q.rows();
  auto project_out = [&](std::vector<double>& x) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < c; ++k) {
        double proj = 0.0;
        for (std::size_t r = 0; r < m; ++r) proj += q(r, k) * x[r];
        for (std::size_t r = 0; r < m; ++r) x[r] -= proj * q(r, k);
      }
  };
  std::vector<double> x = q.col(c);
  const double before = norm2(x);
  project_out(x);
  double n = norm2(x);
  if (before == 0.0 || n < 1e-6 * before) {
    for (std::size_t e = 0; e < m; ++e) {
      std::fill(x.begin(), x.end(), 0.0);
      x[e] = 1.0;
      project_out(x);
      n = norm2(x);
      if (n > 0.5) break;
    }
  }
  for (std::size_t r = 0; r < m; ++r) q(r, c) = x[r] / n;
}

SvdResult svd_tall(const Matrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix u = a;
  Matrix v = Matrix::identity(n);
  jacobi_tall(u, v);

  std::vector<double> norms(n);
  for (std::size_t c = 0; c < n; ++c) norms[c] = norm2(u.col(c));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out;
  out.singulars.resize(n);
  out.left = Matrix(m, n);
  out.right_t = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    const double sigma = norms[src];
    out.singulars[k] = sigma;
    for (std::size_t r = 0; r < m; ++r) out.left(r, k) = sigma > 0.0 ? u(r, src) / sigma : 0.0;
    for (std::size_t r = 0; r < n; ++r) out.right_t(k, r) = v(r, src);
  }
  for (std::size_t k = 0; k < n; ++k) orthonormalize_column(out.left, k);
  return out;
}

}  // namespace

SvdResult svd(const Matrix& a) {
  if (!a.all_finite()) throw std::invalid_argument("svd: non-finite input");
  if (a.rows() >= a.cols()) return svd_tall(a);
  SvdResult t = svd_tall(a.transpose());
  SvdResult out;
  out.singulars = std::move(t.singulars);
  out.left = t.right_t.transpose();
  out.right_t = t.left.transpose();
  return out;
}

std::vector<double> singular_values(const Matrix& a) { return svd(a).singulars; }

Matrix reconstruct(const SvdResult& s) {
  Matrix scaled = s.left;
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= s.singulars[c];
  return matmul(scaled, s.right_t);
}

double operator_norm_power(const std::function<std::vector<double>(const std::vector<double>&)>& apply,
                           const std::function<std::vector<double>(const std::vector<double>&)>& adjoint,
                           std::size_t n_in, PowerOptions opt) {
  if (n_in == 0) return 0.0;
  std::vector<double> v(n_in, 1.0 / std::sqrt(static_cast<double>(n_in)));
  double sigma = norm2(apply(v));
  if (sigma == 0.0) {
    // The all-ones start may lie in the kernel; try a deterministic perturbation.
    for (std::size_t i = 0; i < n_in; ++i) v[i] = 1.0 + 0.37 * std::sin(1.0 + 2.3 * static_cast<double>(i));
    const double nv = norm2(v);
    for (double& x : v) x /= nv;
    sigma = norm2(apply(v));
    if (sigma == 0.0) {
      for (std::size_t e = 0; e < n_in && sigma == 0.0; ++e) {
        std::fill(v.begin(), v.end(), 0.0);
        v[e] = 1.0;
        sigma = norm2(apply(v));
      }
      if (sigma == 0.0) return 0.0;
    }
  }
  double prev_change = -1.0;
  bool perturbed = false;
  for (int it = 0; it < opt.max_iter; ++it) {
    std::vector<double> w = adjoint(apply(v));
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (std::size_t i = 0; i < n_in; ++i) v[i] = w[i] / nw;
    const double next = norm2(apply(v));
    const double change = std::abs(next - sigma);
    sigma = next;
    if (change <= opt.rel_tol * sigma) {
      // Estimate the remaining error from the geometric contraction of the updates.
      double ratio = prev_change > 0.0 ? change / prev_change : 0.0;
      if (ratio >= 1.0) ratio = 0.0;
      const double tail = ratio < 1.0 ? change * ratio / (1.0 - ratio) : 0.0;
      if (tail <= opt.rel_tol * sigma) return sigma;
    }
    if (!perturbed && it == 50 && prev_change >= 0.0 && change > 0.0 && std::abs(change - prev_change) <= 1e-3 * change) {
      // Stagnation: nudge the iterate off any invariant subspace.
      for (std::size_t i = 0; i < n_in; ++i) v[i] += 1e-3 * std::cos(0.7 * static_cast<double>(i) + 0.1);
      const double nv = norm2(v);
      for (double& x : v) x /= nv;
      perturbed = true;
    }
    prev_change = change;
  }
  throw ConvergenceError("power iteration: iteration cap exceeded");
}

double spectral_norm(const Matrix& a, PowerOptions opt) {
  if (!a.all_finite()) throw std::invalid_argument("spectral_norm: non-finite input");
  return operator_norm_power([&](const std::vector<double>& x) { return matvec(a, x); },
                             [&](const std::vector<double>& y) { return matvec_t(a, y); }, a.cols(), opt);
}

int rank_from_singulars(const std::vector<double>& s, double rank_tol) {
  if (s.empty() || s[0] <= 0.0) return 0;
  const double cut = rank_tol * s[0];
  return static_cast<int>(std::count_if(s.begin(), s.end(), [&](double x) { return x > cut; }));
}

double schatten_p_power_from_singulars(const std::vector<double>& s, double p, double rank_tol) {
  if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("Schatten index must lie in [0, 2]");
  if (p == 0.0) return rank_from_singulars(s, rank_tol);
  double acc = 0.0;
  for (double x : s)
    if (x > 0.0) acc += std::pow(x, p);
  return acc;
}

double schatten_qnorm_p_power(const Matrix& a, const Matrix& m_ref, double p, double rank_tol) {
  if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("Schatten index must lie in [0, 2]");
  const Matrix z = m_ref.empty() ? a : a - m_ref;
  return schatten_p_power_from_singulars(singular_values(z), p, rank_tol);
}

double schatten_qnorm(const Matrix& a, const Matrix& m_ref, double p, double rank_tol) {
  const double pp = schatten_qnorm_p_power(a, m_ref, p, rank_tol);
  if (p == 0.0) return pp;
  return std::pow(pp, 1.0 / p);
}

double norm_2_1_transpose(const Matrix& a) {
  double total = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, c) * a(r, c);
    total += std::sqrt(s);
  }
  return total;
}

double norm_2_inf_transpose(const Matrix& a) {
  double best = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += a(r, c) * a(r, c);
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

int numeric_rank(const Matrix& a, double rank_tol) { return rank_from_singulars(singular_values(a), rank_tol); }

}  // namespace scert

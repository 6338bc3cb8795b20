#include "scert/interp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scert/linalg.hpp"
#include "scert/parallel.hpp"

namespace scert {

void SchattenClassSpec::validate() const {
  if (m == 0 || d == 0 || sample_count == 0) throw std::invalid_argument("SchattenClassSpec: zero dimension");
  if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("SchattenClassSpec: p outside [0, 2]");
  if (!(qnorm_bound > 0.0 && spec_bound > 0.0 && sample_bound > 0.0))
    throw std::invalid_argument("SchattenClassSpec: bounds must be positive");
}

double choose_tau(double qnorm_bound, double eps, double p) {
  if (!(qnorm_bound > 0.0) || !(eps > 0.0)) throw std::invalid_argument("choose_tau: nonpositive input");
  if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("choose_tau: p outside [0, 2]");
  if (p == 0.0) return eps;
  return std::pow(qnorm_bound, p / (p + 2.0)) * std::pow(eps, 2.0 / (p + 2.0));
}

Decomposition threshold_decompose(const Matrix& z, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("threshold_decompose: negative threshold");
  const SvdResult s = svd(z);
  Decomposition out;
  out.threshold = tau;
  out.low_rank_part = Matrix(z.rows(), z.cols());
  for (std::size_t k = 0; k < s.singulars.size(); ++k) {
    const double sigma = s.singulars[k];
    if (!(sigma > tau) || sigma == 0.0) continue;
    ++out.kept_rank;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const double ur = s.left(r, k) * sigma;
      for (std::size_t c = 0; c < z.cols(); ++c) out.low_rank_part(r, c) += ur * s.right_t(k, c);
    }
  }
  out.residual_part = z - out.low_rank_part;
  return out;
}

double cover_formula_lowrank(double m, double d, double r, double s, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("cover_formula_lowrank: eps must be positive");
  return (m + d) * r * std::log(1.0 + 6.0 * s / eps);
}

double cover_formula_frobenius(double a, double b, double eps, double m, double n) {
  if (!(eps > 0.0)) throw std::invalid_argument("cover_formula_frobenius: eps must be positive");
  return 36.0 * a * a * b * b / (eps * eps) * std::log2((8.0 * a * b / eps + 7.0) * m * n);
}

namespace {

// 24·[ℳb/ε]^{2p/(p+2)}·[m+d]^{2/(p+2)}·min(m,d)^{p/(p+2)}·extra^{p/(p+2)}·log₂(Γ) with
// Γ = (16[ℳ^p+1][b+1][1+s]·gamma_dims/ε^{p/(p+2)} + 7)·gamma_tail. At p = 0 the rank bound
// replaces ℳ^p in both places.
double schatten_cover_core(const SchattenClassSpec& s, double eps, double extra, double gamma_dims, double gamma_tail) {
  s.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("cover formula: eps must be positive");
  const double m = static_cast<double>(s.m), d = static_cast<double>(s.d);
  const double b = s.sample_bound;
  if (s.p == 0.0) {
    const double r = s.qnorm_bound;
    const double gamma = (16.0 * (r + 1.0) * (b + 1.0) * (1.0 + s.spec_bound) * gamma_dims + 7.0) * gamma_tail;
    return 24.0 * r * (m + d) * std::log2(gamma);
  }
  const double p = s.p;
  const double a = p / (p + 2.0);
  const double lead = 24.0 * std::pow(s.qnorm_bound * b / eps, 2.0 * a) * std::pow(m + d, 2.0 / (p + 2.0)) *
                      std::pow(std::min(m, d), a) * std::pow(extra, a);
  const double gamma =
      (16.0 * (std::pow(s.qnorm_bound, p) + 1.0) * (b + 1.0) * (1.0 + s.spec_bound) * gamma_dims / std::pow(eps, a) + 7.0) *
      gamma_tail;
  return lead * std::log2(gamma);
}

}  // namespace

double cover_formula_schatten_inf(const SchattenClassSpec& spec, double eps) {
  const double m = static_cast<double>(spec.m), d = static_cast<double>(spec.d);
  return schatten_cover_core(spec, eps, 1.0, m + d, m * static_cast<double>(spec.sample_count));
}

double cover_formula_schatten_l2(const SchattenClassSpec& spec, double eps) {
  const double m = static_cast<double>(spec.m), d = static_cast<double>(spec.d);
  return schatten_cover_core(spec, eps, m, (m + d) * (m + d), m * static_cast<double>(spec.sample_count));
}

double cover_formula_conv(const SchattenClassSpec& spec, std::size_t patch_count, double eps) {
  const double u = static_cast<double>(spec.m), d = static_cast<double>(spec.d);
  return schatten_cover_core(spec, eps, 1.0, u + d, u * static_cast<double>(spec.sample_count) * static_cast<double>(patch_count));
}

std::size_t empirical_cover_estimate(const std::vector<Matrix>& class_grid, const Matrix& dataset, double eps,
                                     CoverNorm norm) {
  if (class_grid.size() > 1000000) throw std::length_error("empirical_cover_estimate: grid too large");
  if (class_grid.empty()) return 0;
  const std::size_t n = class_grid.size();
  const std::size_t samples = dataset.rows();
  const std::size_t m = class_grid[0].rows();
  const std::size_t width = samples * m;
  std::vector<double> outputs(n * width);
  parallel_for(n, [&](std::size_t g) {
    for (std::size_t i = 0; i < samples; ++i) {
      const std::vector<double> y = matvec(class_grid[g], dataset.row(i));
      std::copy(y.begin(), y.end(), outputs.begin() + static_cast<std::ptrdiff_t>(g * width + i * m));
    }
  });
  auto within = [&](std::size_t a, std::size_t b) {
    const double* oa = outputs.data() + a * width;
    const double* ob = outputs.data() + b * width;
    for (std::size_t i = 0; i < samples; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) {
        const double diff = std::abs(oa[i * m + k] - ob[i * m + k]);
        if (norm == CoverNorm::linf)
          acc = std::max(acc, diff);
        else
          acc += diff * diff;
      }
      if (norm == CoverNorm::l2) acc = std::sqrt(acc);
      if (acc > eps) return false;
    }
    return true;
  };
  std::vector<char> covered(n, 0);
  std::size_t centers = 0;
  for (std::size_t c = 0; c < n; ++c) {
    if (covered[c]) continue;
    ++centers;
    covered[c] = 1;
    for (std::size_t g = c + 1; g < n; ++g)
      if (!covered[g] && within(c, g)) covered[g] = 1;
  }
  return centers;
}

std::vector<Matrix> schatten_class_grid(const SchattenClassSpec& spec, double step, std::size_t max_size) {
  spec.validate();
  if (!(step > 0.0)) throw std::invalid_argument("schatten_class_grid: step must be positive");
  const double radius = spec.p == 0.0 ? spec.spec_bound : std::min(spec.spec_bound, spec.qnorm_bound);
  const long half = static_cast<long>(std::floor(radius / step + 1e-12));
  const std::size_t per_entry = static_cast<std::size_t>(2 * half + 1);
  const std::size_t entries = spec.m * spec.d;
  double total = 1.0;
  for (std::size_t e = 0; e < entries; ++e) total *= static_cast<double>(per_entry);
  if (total > static_cast<double>(max_size)) throw std::length_error("schatten_class_grid: lattice exceeds size limit");
  const std::size_t count = static_cast<std::size_t>(total);
  const double slack = 1e-12;
  std::vector<Matrix> out;
  std::vector<long> digits(entries, -half);
  for (std::size_t idx = 0; idx < count; ++idx) {
    Matrix z(spec.m, spec.d);
    for (std::size_t e = 0; e < entries; ++e) z.values()[e] = static_cast<double>(digits[e]) * step;
    const std::vector<double> s = singular_values(z);
    const double spec_norm = s.empty() ? 0.0 : s[0];
    bool ok = spec_norm <= spec.spec_bound * (1.0 + slack);
    if (ok) {
      if (spec.p == 0.0)
        ok = rank_from_singulars(s) <= spec.qnorm_bound;
      else
        ok = std::pow(schatten_p_power_from_singulars(s, spec.p), 1.0 / spec.p) <= spec.qnorm_bound * (1.0 + slack);
    }
    if (ok) out.push_back(std::move(z));
    for (std::size_t e = 0; e < entries; ++e) {
      if (++digits[e] <= half) break;
      digits[e] = -half;
    }
  }
  return out;
}

}  // namespace scert

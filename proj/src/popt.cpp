#include "scert/popt.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "scert/parallel.hpp"

namespace scert {

std::vector<double> p_grid(double step) {
  if (!(step > 0.0 && step <= 2.0)) throw std::invalid_argument("p grid step must lie in (0, 2]");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor(2.0 / step + 1e-9));
  for (std::size_t k = 0; k <= n; ++k) g.push_back(std::min(2.0, static_cast<double>(k) * step));
  return g;
}

PGridResult optimize_p(BoundKind kind, const BoundConfig& cfg, const AnalysisInputs& in) {
  const std::vector<double> grid = p_grid(cfg.p_grid_step);
  if (grid.empty()) throw std::invalid_argument("optimize_p: empty grid");
  const std::size_t L = in.depth();
  const std::size_t G = grid.size();
  // table[i][g] = layer_term(i, grid[g])
  std::vector<std::vector<double>> table(L, std::vector<double>(G));
  // Validate the inputs once through rf so degenerate cases raise the same errors.
  rf(kind, in, std::vector<double>(L, 0.0));
  parallel_for(L * G, [&](std::size_t k) {
    const std::size_t i = k / G, g = k % G;
    table[i][g] = layer_term(kind, in, i, grid[g]);
  });

  PGridResult best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> arg(L, 0);
  std::vector<double> run_min(L, std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < G; ++c) {
    for (std::size_t i = 0; i < L; ++i)
      if (table[i][c] < run_min[i]) {
        run_min[i] = table[i][c];
        arg[i] = c;
      }
    // Force one layer to sit at the cap, choosing the cheapest such layer.
    std::size_t forced = L;
    double extra = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L; ++i) {
      if (arg[i] == c) {
        forced = L;
        extra = 0.0;
        break;
      }
      const double delta = table[i][c] - run_min[i];
      if (delta < extra) {
        extra = delta;
        forced = i;
      }
    }
    std::vector<double> p_vec(L);
    for (std::size_t i = 0; i < L; ++i) p_vec[i] = grid[arg[i]];
    if (forced < L) p_vec[forced] = grid[c];
    BoundReport rep = bound_main(kind, cfg, in, p_vec);
    if (rep.value < best.value) {
      best.value = rep.value;
      best.p_vec = p_vec;
      best.cap = grid[c];
      best.layer_terms.assign(L, 0.0);
      for (std::size_t i = 0; i < L; ++i) best.layer_terms[i] = layer_term(kind, in, i, p_vec[i]);
      best.report = std::move(rep);
    }
  }
  best.report.name = to_string(kind);
  return best;
}

std::optional<double> optimize_margin(const ActivationStats& stats, MarginTarget target) {
  if (stats.margins.empty()) throw std::invalid_argument("optimize_margin: no margins");
  if (target == MarginTarget::fraction_cap) return select_margin(stats, 0.1);
  const double q = std::min(margin_fraction(stats, 0.0) + 0.01, 1.0 - 1e-12);
  return select_margin(stats, q);
}

}  // namespace scert

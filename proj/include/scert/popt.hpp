#pragma once

#include <optional>
#include <vector>

#include "scert/bounds.hpp"

namespace scert {

struct PGridResult {
  std::vector<double> p_vec;
  std::vector<double> layer_terms;
  double cap = 0.0;
  double value = 0.0;
  BoundReport report;
};

std::vector<double> p_grid(double step);

// Minimizes bound_main over p_vec ∈ grid^L. For each cap c, the per-layer terms are minimized
// independently over p ≤ c with at least one layer at exactly c, so the result is the exact
// grid optimum. Ties go to smaller p.
PGridResult optimize_p(BoundKind kind, const BoundConfig& cfg, const AnalysisInputs& in);

enum class MarginTarget { fraction_cap, accuracy_drop };

std::optional<double> optimize_margin(const ActivationStats& stats, MarginTarget target);

}  // namespace scert

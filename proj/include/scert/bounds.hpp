#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scert/linalg.hpp"
#include "scert/netmodel.hpp"

namespace scert {

enum class BoundMode { dominant, explicit_constants };
enum class BoundKind { dnn, dnn_aug, cnn, cnn_aug };
enum class Denominator { spectral, spec_op, last_row };

std::string to_string(BoundMode m);
std::string to_string(BoundKind k);
BoundMode parse_mode(const std::string& s);

struct BoundConfig {
  double delta = 0.01;
  std::size_t sample_count = 1;
  double lip = 1.0;         // ℓ, 2/γ for the margin loss
  double loss_bound = 1.0;  // b̄
  BoundMode mode = BoundMode::dominant;
  double p_grid_step = 0.05;
  double rank_tol = kDefaultRankTol;
  double c1 = 2.0;

  void validate() const;
};

struct LayerSpectrum {
  std::vector<double> singulars;      // of A_ℓ (the filter for conv layers)
  std::vector<double> dev_singulars;  // of A_ℓ − M_ℓ
  double spectral = 0.0;              // ‖A_ℓ‖
  double spec_op = 0.0;               // ‖op(A_ℓ)‖, equals spectral for dense layers
  double last_row_norm = 0.0;         // ‖A_ℓᵀ‖_{2,∞}
  double frob = 0.0;                  // ‖A_ℓ‖_F
  double dev_frob = 0.0;              // ‖A_ℓ − M_ℓ‖_F
  double norm21t = 0.0;               // ‖(A_ℓ − M_ℓ)ᵀ‖_{2,1}
  int rank = 0;                       // numeric rank of A_ℓ − M_ℓ
  int weight_rank = 0;                // numeric rank of A_ℓ
  double rank_tol = kDefaultRankTol;

  double qnorm_power(double p) const;  // ‖A_ℓ − M_ℓ‖_{S,p}^p, rank at p = 0
};

LayerSpectrum layer_spectrum(const Layer& layer, double rank_tol = kDefaultRankTol);

struct AnalysisInputs {
  ArchitectureSummary arch;
  std::vector<LayerSpectrum> spectra;
  ActivationStats stats;
  std::vector<double> rho;
  bool all_dense = true;

  std::size_t depth() const { return spectra.size(); }
};

AnalysisInputs prepare_inputs(const NetworkSpec& net, const ActivationStats& stats, double rank_tol = kDefaultRankTol);

struct BoundReport {
  std::string name;
  double value = 0.0;
  std::vector<double> chosen_p;
  std::map<std::string, double> components;
  BoundMode mode = BoundMode::dominant;
};

double margin_loss(const std::vector<double>& scores, std::size_t y, double gamma);
double margin_fraction(const ActivationStats& stats, double gamma);
// Largest γ with margin_fraction ≤ q; nullopt when no positive γ is admissible.
std::optional<double> select_margin(const ActivationStats& stats, double q);

double rank_proxy(const LayerSpectrum& layer, double p, Denominator which);

// Summand of the complexity term for layer index i (zero-based) at Schatten index p.
double layer_term(BoundKind kind, const AnalysisInputs& in, std::size_t i, double p);
double rf(BoundKind kind, const AnalysisInputs& in, const std::vector<double>& p_vec);
double rf_dnn(const AnalysisInputs& in, const std::vector<double>& p_vec);
double rf_dnn_aug(const AnalysisInputs& in, const std::vector<double>& p_vec);
double rf_cnn(const AnalysisInputs& in, const std::vector<double>& p_vec);
double rf_cnn_aug(const AnalysisInputs& in, const std::vector<double>& p_vec);

BoundReport bound_main(BoundKind kind, const BoundConfig& cfg, const AnalysisInputs& in, const std::vector<double>& p_vec);
// Rank-only bound. value follows cfg.mode; both forms are in components.
BoundReport bound_p0(BoundKind kind, const BoundConfig& cfg, const AnalysisInputs& in);

struct LinearFactorInfo {
  double frob_sq_sum = 0.0;  // Σ‖B_ℓ‖_F²
  int factor_count = 1;      // L
};

BoundReport bound_linear(const LayerSpectrum& a, const BoundConfig& cfg, std::size_t classes, std::size_t dim, double p,
                         double input_bound, std::optional<LinearFactorInfo> factors = std::nullopt);

struct MisclassificationBound {
  double value = 0.0;
  double margin_fraction = 0.0;
  bool vacuous = false;
};

MisclassificationBound misclassification_bound(double gap_bound, const ActivationStats& stats, double gamma);

const std::vector<std::string>& baseline_names();
BoundReport baseline(const std::string& name, const AnalysisInputs& in, const BoundConfig& cfg);

}  // namespace scert

#include "scert/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace scert {

std::string to_string(BoundMode m) { return m == BoundMode::dominant ? "dominant" : "explicit"; }

std::string to_string(BoundKind k) {
  switch (k) {
    case BoundKind::dnn: return "dnn";
    case BoundKind::dnn_aug: return "dnn_aug";
    case BoundKind::cnn: return "cnn";
    case BoundKind::cnn_aug: return "cnn_aug";
  }
  return "dnn";
}

BoundMode parse_mode(const std::string& s) {
  if (s == "dominant") return BoundMode::dominant;
  if (s == "explicit") return BoundMode::explicit_constants;
  throw std::invalid_argument("unknown bound mode: " + s);
}

void BoundConfig::validate() const {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (sample_count < 1) throw std::invalid_argument("sample_count must be at least 1");
  if (!(lip > 0.0)) throw std::invalid_argument("lip must be positive");
  if (!(loss_bound > 0.0)) throw std::invalid_argument("loss_bound must be positive");
}

double LayerSpectrum::qnorm_power(double p) const { return schatten_p_power_from_singulars(dev_singulars, p, rank_tol); }

LayerSpectrum layer_spectrum(const Layer& layer, double rank_tol) {
  const Matrix& a = layer_weight(layer);
  const Matrix dev = a - layer_reference(layer);
  LayerSpectrum s;
  s.rank_tol = rank_tol;
  s.singulars = singular_values(a);
  s.dev_singulars = singular_values(dev);
  s.spectral = s.singulars.empty() ? 0.0 : s.singulars[0];
  s.spec_op = is_conv(layer) ? conv_operator_spectral_norm(std::get<ConvLayer>(layer)) : s.spectral;
  s.last_row_norm = norm_2_inf_transpose(a);
  s.frob = a.frobenius();
  s.dev_frob = dev.frobenius();
  s.norm21t = norm_2_1_transpose(dev);
  s.rank = rank_from_singulars(s.dev_singulars, rank_tol);
  s.weight_rank = rank_from_singulars(s.singulars, rank_tol);
  return s;
}

AnalysisInputs prepare_inputs(const NetworkSpec& net, const ActivationStats& stats, double rank_tol) {
  net.validate();
  AnalysisInputs in;
  in.arch = summarize(net);
  in.stats = stats;
  for (const Layer& l : net.layers) {
    in.spectra.push_back(layer_spectrum(l, rank_tol));
    in.rho.push_back(layer_rho(l));
  }
  in.all_dense = !net.has_conv();
  return in;
}

double margin_loss(const std::vector<double>& scores, std::size_t y, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("margin_loss: gamma must be positive");
  if (y >= scores.size()) throw std::out_of_range("margin_loss: invalid class index");
  if (argmax_smallest(scores) != y) return 1.0;
  const double m = score_margin(scores, y);
  if (m >= gamma) return 0.0;
  return 1.0 - m / gamma;
}

double margin_fraction(const ActivationStats& stats, double gamma) {
  if (stats.margins.empty()) return 0.0;
  const auto hits = std::count_if(stats.margins.begin(), stats.margins.end(), [&](double m) { return m <= gamma; });
  return static_cast<double>(hits) / static_cast<double>(stats.margins.size());
}

std::optional<double> select_margin(const ActivationStats& stats, double q) {
  if (!(q >= 0.0 && q < 1.0)) throw std::invalid_argument("select_margin: q must lie in [0, 1)");
  if (stats.margins.empty()) return std::nullopt;
  std::vector<double> sorted = stats.margins;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  const double n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - q) * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  const double m = sorted[k - 1];
  if (!(m > 0.0)) return std::nullopt;
  return m * (1.0 - 1e-9);
}

double rank_proxy(const LayerSpectrum& layer, double p, Denominator which) {
  if (p == 0.0) return layer.rank;
  double denom = 0.0;
  switch (which) {
    case Denominator::spectral: denom = layer.spectral; break;
    case Denominator::spec_op: denom = layer.spec_op; break;
    case Denominator::last_row: denom = layer.last_row_norm; break;
  }
  if (!(denom > 0.0)) throw std::domain_error("rank_proxy: zero denominator");
  return layer.qnorm_power(p) / std::pow(denom, p);
}

namespace {

bool is_dense_kind(BoundKind k) { return k == BoundKind::dnn || k == BoundKind::dnn_aug; }
bool is_aug_kind(BoundKind k) { return k == BoundKind::dnn_aug || k == BoundKind::cnn_aug; }

void check_p_vec(const AnalysisInputs& in, const std::vector<double>& p_vec) {
  if (p_vec.size() != in.depth()) throw std::invalid_argument("p_vec length differs from network depth");
  for (double p : p_vec)
    if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("p_vec entries must lie in [0, 2]");
}

void check_kind(BoundKind kind, const AnalysisInputs& in) {
  if (is_dense_kind(kind) && !in.all_dense) throw std::invalid_argument("fully-connected bound requested for a convolutional network");
  for (const auto& s : in.spectra)
    if (!(s.spectral > 0.0) || !(s.spec_op > 0.0)) throw std::domain_error("degenerate spectra: a layer has zero norm");
}

// Norm-based prefactor entering layer i's term.
double layer_prefactor(BoundKind kind, const AnalysisInputs& in, std::size_t i) {
  const std::size_t L = in.depth();
  const auto& sp = in.spectra;
  switch (kind) {
    case BoundKind::dnn: {
      double p = in.stats.input_bound * in.rho[L - 1] * sp[L - 1].last_row_norm;
      for (std::size_t j = 0; j + 1 < L; ++j) p *= in.rho[j] * sp[j].spectral;
      return p;
    }
    case BoundKind::dnn_aug: {
      double p = in.stats.layer_bounds[i] * in.rho[L - 1] * sp[L - 1].last_row_norm;
      for (std::size_t j = i; j + 1 < L; ++j) p *= in.rho[j] * sp[j].spectral;
      return p;
    }
    case BoundKind::cnn: {
      double p = in.stats.input_bound;
      for (std::size_t j = 0; j < L; ++j) p *= in.rho[j] * sp[j].spec_op;
      return p;
    }
    case BoundKind::cnn_aug: {
      double p = in.stats.conv_patch_bounds[i];
      for (std::size_t j = i; j < L; ++j) p *= in.rho[j] * sp[j].spec_op;
      return p;
    }
  }
  return 0.0;
}

double log_pos(double x) { return x > 1.0 ? std::log(x) : 0.0; }
double abs_log(double x) { return x > 0.0 ? std::abs(std::log(x)) : 0.0; }

}  // namespace

double layer_term(BoundKind kind, const AnalysisInputs& in, std::size_t i, double p) {
  if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("layer_term: p outside [0, 2]");
  const std::size_t L = in.depth();
  const auto& a = in.arch;
  const double e_norm = 2.0 * p / (p + 2.0);
  const double e_proxy = 2.0 / (p + 2.0);
  const double e_par = p / (p + 2.0);
  const double pref = std::pow(layer_prefactor(kind, in, i), e_norm);
  if (is_dense_kind(kind)) {
    const Denominator den = i + 1 == L ? Denominator::last_row : Denominator::spectral;
    const double proxy = rank_proxy(in.spectra[i], p, den);
    return pref * std::pow(proxy, e_proxy) * std::pow(a.wbar(i), e_proxy) * std::pow(a.wtilde(i), e_par);
  }
  const double proxy = rank_proxy(in.spectra[i], p, Denominator::spec_op);
  const double u = static_cast<double>(a.channels[i]);
  const double d = static_cast<double>(a.patch_dim[i]);
  return pref * std::pow(proxy, e_proxy) * std::pow(u + d, e_proxy) * std::pow(std::min(u, d), e_par) *
         std::pow(a.big_w[i], e_par);
}

double rf(BoundKind kind, const AnalysisInputs& in, const std::vector<double>& p_vec) {
  check_p_vec(in, p_vec);
  check_kind(kind, in);
  double total = 0.0;
  for (std::size_t i = 0; i < in.depth(); ++i) total += layer_term(kind, in, i, p_vec[i]);
  return std::sqrt(total);
}

double rf_dnn(const AnalysisInputs& in, const std::vector<double>& p_vec) { return rf(BoundKind::dnn, in, p_vec); }
double rf_dnn_aug(const AnalysisInputs& in, const std::vector<double>& p_vec) { return rf(BoundKind::dnn_aug, in, p_vec); }
double rf_cnn(const AnalysisInputs& in, const std::vector<double>& p_vec) { return rf(BoundKind::cnn, in, p_vec); }
double rf_cnn_aug(const AnalysisInputs& in, const std::vector<double>& p_vec) { return rf(BoundKind::cnn_aug, in, p_vec); }

BoundReport bound_main(BoundKind kind, const BoundConfig& cfg, const AnalysisInputs& in, const std::vector<double>& p_vec) {
  cfg.validate();
  const double r = rf(kind, in, p_vec);
  const double L = static_cast<double>(in.depth());
  const double N = static_cast<double>(cfg.sample_count);
  const double bbar = cfg.loss_bound;
  const double lip = cfg.lip;
  const double p = *std::max_element(p_vec.begin(), p_vec.end());
  const double e = p / (2.0 + p);

  BoundReport rep;
  rep.name = to_string(kind);
  rep.chosen_p = p_vec;
  rep.mode = cfg.mode;
  rep.components["R"] = r;
  rep.components["p_max"] = p;

  if (cfg.mode == BoundMode::dominant) {
    const double t_delta = bbar * std::sqrt(std::log(1.0 / cfg.delta) / N);
    const double t_depth = bbar * std::sqrt(L * L * L / N);
    const double pref = std::pow(L * lip, e);
    const double t_cx = bbar * pref * std::sqrt(L / N) * r;
    rep.components["delta_term"] = t_delta;
    rep.components["depth_term"] = t_depth;
    rep.components["complexity_term"] = t_cx;
    rep.components["prefactor"] = pref;
    rep.value = t_delta + t_depth + t_cx;
    return rep;
  }

  const std::size_t depth = in.depth();
  const bool dense = is_dense_kind(kind);
  const bool aug = is_aug_kind(kind);
  const double b = in.stats.input_bound;
  const double maxw = in.arch.max_width;
  double prod = 1.0, prod1 = 1.0, sum_abs_log = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    const double n = dense ? in.spectra[i].spectral : in.spectra[i].spec_op;
    prod *= in.rho[i] * n;
    prod1 *= in.rho[i] * n + 1.0;
    sum_abs_log += abs_log(n);
  }
  double aug_logs = 0.0;
  if (aug)
    for (std::size_t i = 1; i < depth; ++i)
      aug_logs += std::log(dense ? in.stats.layer_bounds[i] : in.stats.conv_patch_bounds[i]);

  double theta = 0.0, gamma = 0.0, c0 = 0.0, c_lead = 0.0, pref_base = 0.0;
  if (dense) {
    theta = 2.0 * log_pos(4.0 * maxw + b * prod) * (abs_log(b) + L * (sum_abs_log + 2.0 * std::log(4.0 * maxw) + aug_logs));
    gamma = 12.0 * (b + 1.0) * (L * lip + 1.0) * maxw * N * prod1 * (4.0 * maxw + b * prod);
    c0 = aug ? 1.5 : 5.0;
    c_lead = aug ? 832.0 : 480.0;
  } else {
    const double W = in.arch.total_params, A = in.arch.total_preacts;
    theta = 2.0 * log_pos(4.0 * W * A + b * prod) * (abs_log(b) + L * (sum_abs_log + 2.0 * std::log(4.0 * A * W) + aug_logs));
    gamma = 12.0 * (b + 1.0) * (L * lip + 1.0) * W * A * N * prod1 * (4.0 * maxw + b * prod);
    c0 = 2.0;
    c_lead = aug ? 722.0 : 416.0;
  }
  pref_base = aug ? L * (1.0 + lip) : 1.0 + L * lip;
  const double pref = std::pow(pref_base, e);
  const double t_delta = 6.0 * (bbar + 1.0) * std::sqrt(std::log(1.0 / cfg.delta) / N);
  const double t_theta = 6.0 * bbar * std::sqrt((c0 + theta) / N);
  const double t_cx = c_lead * (bbar + 1.0) * pref * std::sqrt(log_pos(gamma)) * std::log(N) / std::sqrt(N) * r;
  rep.components["delta_term"] = t_delta;
  rep.components["theta_term"] = t_theta;
  rep.components["complexity_term"] = t_cx;
  rep.components["theta_log"] = theta;
  rep.components["gamma_log_arg"] = gamma;
  rep.components["prefactor"] = pref;
  rep.value = t_delta + t_theta + t_cx;
  return rep;
}

BoundReport bound_p0(BoundKind kind, const BoundConfig& cfg, const AnalysisInputs& in) {
  cfg.validate();
  const bool dense = is_dense_kind(kind);
  if (dense && !in.all_dense) throw std::invalid_argument("fully-connected bound requested for a convolutional network");
  const std::size_t depth = in.depth();
  const double L = static_cast<double>(depth);
  const double N = static_cast<double>(cfg.sample_count);
  const double bbar = cfg.loss_bound;
  const double b = in.stats.input_bound;
  const auto& a = in.arch;

  double rank_sum = 0.0, prod2 = 1.0, gamma_prod = 1.0;
  for (std::size_t i = 0; i < depth; ++i) {
    const double r = in.spectra[i].rank;
    const double dims = dense ? a.wbar(i) : static_cast<double>(a.channels[i] + a.patch_dim[i]);
    rank_sum += dims * r;
    const double n = in.spectra[i].spectral;
    prod2 *= n + 2.0;
    gamma_prod *= (in.rho[i] + 1.0) * (n + 2.0) + 1.0;
  }
  const double size_factor = dense ? a.max_width : a.total_params * a.total_preacts;
  const double gamma_r = (b + 2.0) * (L * cfg.lip + 1.0) * size_factor * N * gamma_prod;
  const double c_lead = dense ? 240.0 : 208.0;
  const double full = 6.0 * (bbar + 1.0) * std::sqrt(std::log(4.0 / cfg.delta) / N) +
                      c_lead * std::sqrt(std::log2(4.0 * gamma_r)) * std::log(N) * (bbar + 1.0) / std::sqrt(N) * rank_sum +
                      std::sqrt((std::log(4.0 / cfg.delta) + 2.0 * std::log((b + 2.0) * prod2) + L * std::log(a.max_width)) / N);
  const double compact = bbar * std::sqrt(std::log(1.0 / cfg.delta) / N) + bbar * std::sqrt(L * rank_sum / N);

  BoundReport rep;
  rep.name = dense ? "dnn_rank" : "cnn_rank";
  rep.mode = cfg.mode;
  rep.chosen_p.assign(depth, 0.0);
  rep.components["rank_sum"] = rank_sum;
  rep.components["rank_sum_sqrt"] = std::sqrt(rank_sum);
  rep.components["full_form"] = full;
  rep.components["compact_form"] = compact;
  rep.components["gamma_r"] = gamma_r;
  rep.value = cfg.mode == BoundMode::dominant ? compact : full;
  return rep;
}

BoundReport bound_linear(const LayerSpectrum& a, const BoundConfig& cfg, std::size_t classes, std::size_t dim, double p,
                         double input_bound, std::optional<LinearFactorInfo> factors) {
  cfg.validate();
  if (!(p >= 0.0 && p <= 2.0)) throw std::domain_error("bound_linear: p outside [0, 2]");
  const double N = static_cast<double>(cfg.sample_count);
  const double C = static_cast<double>(classes), d = static_cast<double>(dim);
  const double lb = cfg.lip * input_bound;
  const double qp = a.qnorm_power(p);
  const double inner = std::pow(lb, 2.0 * p / (2.0 + p)) * std::pow(qp, 2.0 / (2.0 + p)) *
                       std::pow(std::min(C, d), p / (p + 2.0)) * std::pow(C + d, 2.0 / (p + 2.0)) / N;
  BoundReport rep;
  rep.name = "bound_linear";
  rep.mode = cfg.mode;
  rep.chosen_p = {p};
  rep.value = std::sqrt(inner);
  rep.components["delta_term"] = cfg.loss_bound * std::sqrt(std::log(1.0 / cfg.delta) / N);
  rep.components["schatten_power"] = qp;
  if (factors) {
    const double Lf = factors->factor_count;
    rep.components["weight_decay_form"] =
        std::sqrt(std::pow(lb, 2.0 / (Lf + 1.0)) * std::pow(factors->frob_sq_sum, Lf / (Lf + 1.0)) * (C + d) /
                  (N * std::pow(Lf, Lf / (Lf + 1.0))));
  }
  return rep;
}

MisclassificationBound misclassification_bound(double gap_bound, const ActivationStats& stats, double gamma) {
  MisclassificationBound out;
  out.margin_fraction = margin_fraction(stats, gamma);
  out.value = std::max(0.0, gap_bound + out.margin_fraction);
  out.vacuous = out.value > 1.0;
  return out;
}

const std::vector<std::string>& baseline_names() {
  static const std::vector<std::string> names = {"golowich", "neyshabur", "bartlett",   "long_sedghi", "graf",
                                                 "alt",      "lei_linear", "galanti_cnn", "ledent_cnn"};
  return names;
}

BoundReport baseline(const std::string& name, const AnalysisInputs& in, const BoundConfig& cfg) {
  cfg.validate();
  const std::size_t depth = in.depth();
  const double L = static_cast<double>(depth);
  const double N = static_cast<double>(cfg.sample_count);
  const double lip = cfg.lip, bbar = cfg.loss_bound;
  const double b = in.stats.input_bound;
  const auto& sp = in.spectra;
  auto need_dense = [&] {
    if (!in.all_dense) throw std::invalid_argument(name + " baseline requires a fully-connected network");
  };
  auto need_conv = [&] {
    if (in.all_dense) throw std::invalid_argument(name + " baseline requires convolutional layers");
  };
  auto norm_of = [&](std::size_t i) { return sp[i].spec_op; };
  double prod_spec = 1.0, prod_frob = 1.0;
  for (std::size_t i = 0; i < depth; ++i) {
    prod_spec *= norm_of(i);
    prod_frob *= sp[i].frob;
  }

  BoundReport rep;
  rep.name = name;
  rep.mode = BoundMode::dominant;
  if (name == "golowich") {
    need_dense();
    rep.value = lip * std::sqrt(b * b * L * prod_frob * prod_frob / N);
  } else if (name == "neyshabur") {
    need_dense();
    double ratio = 0.0;
    for (std::size_t i = 0; i < depth; ++i) ratio += sp[i].dev_frob * sp[i].dev_frob / (sp[i].spectral * sp[i].spectral);
    rep.components["ratio_sum"] = ratio;
    rep.value = lip * L * std::sqrt(in.arch.max_width) / std::sqrt(N) * prod_spec * std::sqrt(ratio);
  } else if (name == "bartlett") {
    need_dense();
    double ratio = 0.0;
    for (std::size_t i = 0; i < depth; ++i) ratio += std::pow(sp[i].norm21t / sp[i].spectral, 2.0 / 3.0);
    rep.components["ratio_sum"] = ratio;
    rep.value = lip / std::sqrt(N) * prod_spec * std::pow(ratio, 1.5);
  } else if (name == "long_sedghi") {
    double max_norm = 0.0;
    for (std::size_t i = 0; i < depth; ++i) max_norm = std::max(max_norm, norm_of(i));
    const double S = std::max(max_norm - 1.0, 1.0);
    rep.components["S"] = S;
    rep.value = bbar * std::sqrt(in.arch.total_params * S * L / N);
  } else if (name == "graf") {
    rep.value = bbar * std::sqrt(in.arch.total_params * L / N);
  } else if (name == "alt" || name == "alt_c1_1") {
    need_dense();
    const double c1 = name == "alt" ? cfg.c1 : 1.0;
    int min_rank = sp[0].weight_rank;
    for (const auto& s : sp) min_rank = std::min(min_rank, s.weight_rank);
    rep.components["min_rank"] = min_rank;
    rep.components["c1"] = c1;
    rep.value = lip * std::pow(c1, L) * b * prod_spec * L * min_rank * std::sqrt(in.arch.max_width / N);
  } else if (name == "lei_linear") {
    need_dense();
    if (depth != 1) throw std::invalid_argument("lei_linear baseline requires a single linear layer");
    rep.value = lip * b * sp[0].frob / std::sqrt(N);
  } else if (name == "galanti_cnn") {
    need_conv();
    double q = 1.0;
    for (double k : in.arch.kernel_area) q *= k;
    rep.components["kernel_product"] = q;
    rep.value = lip * prod_frob * std::sqrt(L * q) * in.stats.input_patch_bound / std::sqrt(N);
  } else if (name == "ledent_cnn") {
    need_conv();
    double ratio = 0.0;
    for (std::size_t i = 0; i < depth; ++i) {
      const double uw = static_cast<double>(in.arch.channels[i] * in.arch.spatial[i]);
      ratio += std::pow(uw * sp[i].norm21t / sp[i].spec_op, 2.0 / 3.0);
    }
    rep.components["ratio_sum"] = ratio;
    rep.value = lip / std::sqrt(N) * prod_spec * std::pow(ratio, 1.5);
  } else {
    throw std::invalid_argument("unknown baseline: " + name);
  }
  return rep;
}

}  // namespace scert

#include "scert/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "scert/bounds.hpp"
#include "scert/interp.hpp"
#include "scert/linalg.hpp"
#include "scert/popt.hpp"

namespace scert {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

Matrix random_matrix(std::mt19937_64& rng, std::size_t max_dim) {
  std::uniform_int_distribution<std::size_t> dim(1, max_dim);
  const std::size_t m = dim(rng), d = dim(rng);
  return Matrix::gaussian(m, d, rng);
}

}  // namespace

std::vector<TrainedFixture> trained_fixtures(std::size_t count, std::uint64_t seed) {
  std::vector<TrainedFixture> out;
  SynthOptions so;
  so.center_radius = 3.0;
  so.min_separation = 2.5;
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t s = seed * 1000 + k;
    const Dataset all = synth_dataset(3, 6, 400, s, so);
    TrainedFixture f;
    f.train = subset(all, 0, 200);
    f.test = subset(all, 200, 400);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.seed = s;
    cfg.weight_decay = k % 2 == 0 ? 0.0 : 1e-3;
    cfg.arch.input_dim = 6;
    cfg.arch.hidden = {8 + 4 * (k % 3), 8};
    cfg.arch.classes = 3;
    f.net = sgd_train(build_network(cfg.arch, s), f.train, cfg).net;
    out.push_back(std::move(f));
  }
  return out;
}

CheckResult check_variational(std::size_t instances, std::uint64_t seed, DescentOptions opt) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "variational depth identity";
  r.instances = instances;
  std::mt19937_64 rng(seed);
  std::size_t analytic_bad = 0, descent_ok = 0;
  double worst_analytic = 0.0, worst_descent = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Matrix a = random_matrix(rng, 6);
    const int L = 2 + static_cast<int>(k % 3);
    const double target = L * schatten_p_power_from_singulars(singular_values(a), 2.0 / L);
    const std::size_t width = std::max(a.rows(), a.cols());
    const double analytic = weight_decay_objective(balanced_factorization(a, L, width));
    const double ea = rel_diff(analytic, target);
    worst_analytic = std::max(worst_analytic, ea);
    if (ea > 1e-8) ++analytic_bad;
    DescentOptions o = opt;
    o.base_seed = opt.base_seed + 104729 * k;
    double found = std::numeric_limits<double>::infinity();
    try {
      found = descent_factorization_oracle(a, L, width, o);
    } catch (const std::runtime_error&) {
    }
    const double ed = std::isfinite(found) ? rel_diff(found, analytic) : 1.0;
    worst_descent = std::max(worst_descent, ed);
    if (ed <= 1e-3) ++descent_ok;
  }
  const double rate = instances ? static_cast<double>(descent_ok) / static_cast<double>(instances) : 0.0;
  r.violations = analytic_bad + (instances - descent_ok);
  r.passed = analytic_bad == 0 && rate >= 0.95;
  std::ostringstream d;
  d << "analytic worst rel err " << worst_analytic << ", descent within 1e-3 on " << descent_ok << "/" << instances
    << " (worst " << worst_descent << ")";
  r.detail = d.str();
  r.seconds = since(t0);
  return r;
}

CheckResult check_schatten_identity(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "weighted Schatten identity";
  r.instances = instances;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pd(0.2, 1.0);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Matrix a = random_matrix(rng, 6);
    std::vector<double> p_list(2 + k % 3);
    for (double& p : p_list) p = pd(rng);
    const double p = conjugate_index(p_list);
    const double target = schatten_p_power_from_singulars(singular_values(a), p);
    const double got = weighted_schatten_objective(balanced_factorization_schatten(a, p_list), p_list);
    const double e = rel_diff(got, target);
    worst = std::max(worst, e);
    if (e > 1e-8) ++r.violations;
  }
  r.passed = r.violations == 0;
  r.detail = "worst rel err " + sci(worst);
  r.seconds = since(t0);
  return r;
}

CheckResult check_decomposition(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "threshold decomposition";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> eps_d(0.05, 2.0);
  const double ps[] = {0.25, 0.5, 1.0, 2.0};
  std::size_t recon = 0, rank_bad = 0, frob_bad = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Matrix z = random_matrix(rng, 6);
    const auto s = singular_values(z);
    const double eps = eps_d(rng);
    for (double p : ps) {
      ++r.instances;
      const double qp = schatten_p_power_from_singulars(s, p);
      const double tau = choose_tau(std::pow(qp, 1.0 / p), eps, p);
      const Decomposition dec = threshold_decompose(z, tau);
      if ((z - dec.low_rank_part - dec.residual_part).frobenius() > 1e-10) ++recon;
      if (dec.kept_rank * std::pow(tau, p) > qp * (1.0 + 1e-12)) ++rank_bad;
      const double f = dec.residual_part.frobenius();
      if (f * f > tau * tau * static_cast<double>(std::min(z.rows(), z.cols())) * (1.0 + 1e-12)) ++frob_bad;
    }
  }
  r.violations = recon + rank_bad + frob_bad;
  r.passed = r.violations == 0;
  std::ostringstream d;
  d << "reconstruction " << recon << ", rank " << rank_bad << ", residual " << frob_bad << " violations";
  r.detail = d.str();
  r.seconds = since(t0);
  return r;
}

CheckResult check_cover_domination(std::uint64_t seed, bool quick) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "cover formula domination";
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.2, 1.0);
  std::vector<Matrix> datasets;
  for (std::size_t n = 2; n <= 4; ++n) {
    Matrix x(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(3);
      for (double& e : v) e = nd(rng);
      const double scale = ud(rng) / norm2(v);
      for (std::size_t c = 0; c < 3; ++c) x(i, c) = v[c] * scale;
    }
    datasets.push_back(x);
  }
  const std::pair<std::size_t, std::size_t> shapes[] = {{1, 1}, {1, 2}, {2, 1}, {1, 3}, {3, 1}, {2, 2}};
  const double spec_bounds[] = {1.0, 2.0};
  const double ps[] = {0.0, 0.5, 1.0, 2.0};
  const double epss[] = {0.5, 1.0};
  double worst_gap = -std::numeric_limits<double>::infinity();
  std::size_t skipped = 0;
  for (const auto& [m, d] : shapes) {
    if (quick && m * d > 2) continue;
    for (double s : spec_bounds)
      for (double p : ps)
        for (double eps : epss) {
          SchattenClassSpec spec;
          spec.m = m;
          spec.d = d;
          spec.p = p;
          spec.qnorm_bound = 1.0;
          spec.spec_bound = s;
          spec.sample_bound = 1.0;
          std::vector<Matrix> grid;
          try {
            grid = schatten_class_grid(spec, eps / 4.0, 2000000);
          } catch (const std::length_error&) {
            ++skipped;
            continue;
          }
          for (const Matrix& x : datasets) {
            Matrix xs(x.rows(), d);
            for (std::size_t i = 0; i < x.rows(); ++i)
              for (std::size_t c = 0; c < d; ++c) xs(i, c) = x(i, c);
            spec.sample_count = x.rows();
            ++r.instances;
            const std::size_t cover = empirical_cover_estimate(grid, xs, eps, CoverNorm::linf);
            const double lhs = std::log(static_cast<double>(std::max<std::size_t>(cover, 1)));
            const double rhs = cover_formula_schatten_inf(spec, eps / 2.0);
            worst_gap = std::max(worst_gap, lhs - rhs);
            if (lhs > rhs) ++r.violations;
          }
        }
  }
  r.passed = r.violations == 0 && r.instances > 0;
  std::ostringstream d;
  d << "max(log cover - formula) = " << worst_gap << ", lattices over the size limit skipped: " << skipped;
  r.detail = d.str();
  r.seconds = since(t0);
  return r;
}

CheckResult check_conv_operator(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "conv operator norm";
  r.instances = instances;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> side(2, 6), chans(1, 2), outc(1, 3);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    ConvGeometry g;
    g.in_channels = chans(rng);
    g.in_height = side(rng);
    g.in_width = side(rng);
    g.kernel_h = std::uniform_int_distribution<int>(1, std::min(3, g.in_height))(rng);
    g.kernel_w = std::uniform_int_distribution<int>(1, std::min(3, g.in_width))(rng);
    g.stride = k % 2 == 0 ? 1 : std::uniform_int_distribution<int>(1, 2)(rng);
    const std::size_t dim = static_cast<std::size_t>(g.in_channels * g.kernel_h * g.kernel_w);
    const ConvLayer c = make_conv_layer(g, Matrix::gaussian(static_cast<std::size_t>(outc(rng)), dim, rng));
    const double e = rel_diff(conv_operator_spectral_norm(c), spectral_norm(conv_materialize(c)));
    worst = std::max(worst, e);
    if (e > 1e-6) ++r.violations;
  }
  r.passed = r.violations == 0;
  r.detail = "worst rel err " + sci(worst);
  r.seconds = since(t0);
  return r;
}

CheckResult check_gradient(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "trainer gradient";
  std::mt19937_64 rng(seed);
  ArchitectureDescriptor arch;
  arch.input_dim = 4;
  arch.hidden = {6};
  arch.classes = 3;
  NetworkSpec net = build_network(arch, seed);
  const Dataset data = synth_dataset(3, 4, 5, seed);
  std::vector<std::size_t> batch(data.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch[i] = i;
  const double lambda = 0.01, h = 1e-5;
  const LossGrad lg = loss_and_gradient(net, data.inputs, data.labels, batch, lambda);
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    Matrix& w = layer_weight(net.layers[l]);
    for (std::size_t k = 0; k < w.size(); ++k) {
      ++r.instances;
      const double orig = w.values()[k];
      w.values()[k] = orig + h;
      const double up = total_loss(net, data.inputs, data.labels, lambda);
      w.values()[k] = orig - h;
      const double down = total_loss(net, data.inputs, data.labels, lambda);
      w.values()[k] = orig;
      const double num = (up - down) / (2.0 * h);
      const double ana = lg.grads[l].values()[k];
      diff += (num - ana) * (num - ana);
      na += ana * ana;
      nn += num * num;
    }
  }
  const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
  r.violations = rel <= 1e-4 ? 0 : 1;
  r.passed = r.violations == 0;
  r.detail = "relative error " + sci(rel);
  r.seconds = since(t0);
  return r;
}

CheckResult check_bound_algebra(const std::vector<TrainedFixture>& nets, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "bound algebra";
  std::mt19937_64 rng(seed);
  std::size_t opt_bad = 0, aug_bad = 0, p0_bad = 0, mode_bad = 0;
  for (const TrainedFixture& f : nets) {
    ++r.instances;
    const ActivationStats stats = activation_stats(f.net, f.train.inputs, f.train.labels);
    const auto gamma = select_margin(stats, 0.1);
    BoundConfig cfg;
    cfg.sample_count = f.train.size();
    cfg.lip = gamma ? 2.0 / *gamma : 1.0;
    const AnalysisInputs in = prepare_inputs(f.net, stats);
    const std::vector<double> grid = p_grid(cfg.p_grid_step);
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    for (BoundKind kind : {BoundKind::dnn, BoundKind::dnn_aug}) {
      const PGridResult best = optimize_p(kind, cfg, in);
      for (int t = 0; t < 50; ++t) {
        std::vector<double> pv(in.depth());
        for (double& p : pv) p = grid[pick(rng)];
        if (best.value > bound_main(kind, cfg, in, pv).value * (1.0 + 1e-12)) ++opt_bad;
        if (kind == BoundKind::dnn && rf_dnn_aug(in, pv) > rf_dnn(in, pv) * (1.0 + 1e-12)) ++aug_bad;
      }
      BoundConfig ex = cfg;
      ex.mode = BoundMode::explicit_constants;
      if (optimize_p(kind, ex, in).value < best.value) ++mode_bad;
    }
    const std::vector<double> zeros(in.depth(), 0.0);
    const BoundReport p0 = bound_p0(BoundKind::dnn, cfg, in);
    if (rel_diff(rf_dnn(in, zeros), p0.components.at("rank_sum_sqrt")) > 1e-12) ++p0_bad;
    if (p0.components.at("full_form") < p0.components.at("compact_form")) ++mode_bad;
  }
  r.violations = opt_bad + aug_bad + p0_bad + mode_bad;
  r.passed = r.violations == 0 && r.instances > 0;
  std::ostringstream d;
  d << "optimizer " << opt_bad << ", augmentation " << aug_bad << ", rank form " << p0_bad << ", mode order " << mode_bad
    << " violations";
  r.detail = d.str();
  r.seconds = since(t0);
  return r;
}

CheckResult check_misclassification(const std::vector<TrainedFixture>& nets) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "misclassification transfer";
  std::size_t vacuous = 0;
  double tightest = std::numeric_limits<double>::infinity();
  for (const TrainedFixture& f : nets) {
    ++r.instances;
    const ActivationStats stats = activation_stats(f.net, f.train.inputs, f.train.labels);
    const ActivationStats held = activation_stats(f.net, f.test.inputs, f.test.labels);
    const auto gamma = select_margin(stats, 0.1);
    if (!gamma) {
      // No positive margin: the bound is 1 from the margin term alone.
      if (held.error_rate() > 1.0) ++r.violations;
      continue;
    }
    BoundConfig cfg;
    cfg.sample_count = f.train.size();
    cfg.lip = 2.0 / *gamma;
    const AnalysisInputs in = prepare_inputs(f.net, stats);
    const double gap = optimize_p(BoundKind::dnn, cfg, in).value;
    const MisclassificationBound mb = misclassification_bound(gap, stats, *gamma);
    if (mb.vacuous) ++vacuous;
    tightest = std::min(tightest, mb.value - held.error_rate());
    if (mb.value < held.error_rate()) ++r.violations;
  }
  r.passed = r.violations == 0 && r.instances > 0;
  std::ostringstream d;
  d << "min(bound - held-out error) = " << tightest << ", vacuous " << vacuous << "/" << r.instances;
  r.detail = d.str();
  r.seconds = since(t0);
  return r;
}

CheckResult check_rank_sweep(SweepCheckOptions opt) {
  const auto t0 = Clock::now();
  CheckResult r;
  r.name = "rank-collapse width sweep";
  SynthOptions so;
  so.center_radius = 5.0;
  so.min_separation = 4.0;
  const Dataset all = synth_dataset(4, 16, 1200, opt.seed, so);
  const Dataset train = subset(all, 0, 600), test = subset(all, 600, 1200);
  TrainConfig base;
  base.epochs = 60;
  base.learning_rate = 0.1;
  base.spectral_cap = 1.0;
  base.seed = opt.seed;
  base.arch.input_dim = 16;
  base.arch.hidden = {opt.narrow, opt.narrow};
  base.arch.classes = 4;
  const SweepReport rep = rank_sweep(base, {opt.narrow, opt.wide}, opt.decays, train, test);
  const SweepRow* sel[2] = {nullptr, nullptr};
  for (const SweepRow& row : rep.rows)
    if (row.selected) sel[row.width == opt.narrow ? 0 : 1] = &row;
  r.instances = rep.rows.size();
  std::ostringstream d;
  if (!sel[0] || !sel[1] || !std::isfinite(sel[0]->bound_dnn) || !std::isfinite(sel[1]->bound_dnn)) {
    r.violations = 1;
    d << "no admissible configuration for " << (sel[0] ? "" : "narrow ") << (sel[1] ? "" : "wide ") << "width";
  } else {
    const double ours = sel[1]->bound_dnn / sel[0]->bound_dnn;
    const double graf = sel[1]->graf / sel[0]->graf;
    const double acc_gap = std::abs(sel[1]->test_accuracy - sel[0]->test_accuracy);
    if (ours > opt.max_growth_ratio * graf) ++r.violations;
    if (acc_gap > opt.accuracy_window + 1e-12) ++r.violations;
    d << "bound growth " << ours << " vs graf growth " << graf << " (ratio " << ours / graf << "), lambda "
      << sel[0]->weight_decay << "/" << sel[1]->weight_decay << ", test acc " << sel[0]->test_accuracy << "/"
      << sel[1]->test_accuracy;
  }
  r.passed = r.violations == 0;
  r.detail = d.str();
  r.seconds = since(t0);
  return r;
}

}  // namespace scert

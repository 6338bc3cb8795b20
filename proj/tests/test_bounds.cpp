#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "scert/bounds.hpp"
#include "scert/popt.hpp"

using namespace scert;

namespace {

NetworkSpec dense_net(std::mt19937_64& rng, const std::vector<std::size_t>& widths, Activation act = Activation::relu) {
  NetworkSpec net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayer l;
    l.weight = Matrix::gaussian(widths[i + 1], widths[i], rng, 1.0 / std::sqrt(static_cast<double>(widths[i])));
    l.reference = Matrix(widths[i + 1], widths[i]);
    l.activation = act;
    net.layers.emplace_back(std::move(l));
  }
  net.class_count = static_cast<int>(widths.back());
  return net;
}

ActivationStats stats_for(const NetworkSpec& net, std::mt19937_64& rng, std::size_t n) {
  const Matrix x = Matrix::gaussian(n, net.input_size(), rng);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % net.class_count);
  return activation_stats(net, x, labels);
}

ActivationStats margins_only(std::vector<double> m) {
  ActivationStats s;
  s.margins = std::move(m);
  return s;
}

BoundConfig config(std::size_t n) {
  BoundConfig c;
  c.sample_count = n;
  c.lip = 2.0;
  return c;
}

}  // namespace

TEST(MarginLoss, Branches) {
  EXPECT_EQ(margin_loss({2.0, 0.0}, 0, 1.0), 0.0);
  EXPECT_NEAR(margin_loss({0.5, 0.0}, 0, 1.0), 0.5, 1e-15);
  EXPECT_EQ(margin_loss({0.0, 1.0}, 0, 1.0), 1.0);
}

TEST(MarginFraction, Counts) {
  EXPECT_EQ(margin_fraction(margins_only({3.0, 3.0, 3.0}), 1.0), 0.0);
  EXPECT_NEAR(margin_fraction(margins_only({-1.0, 0.5, 3.0}), 1.0), 2.0 / 3.0, 1e-15);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  std::vector<double> m(50);
  for (double& v : m) v = g(rng);
  int naive = 0;
  for (double v : m) naive += v <= 0.3;
  EXPECT_NEAR(margin_fraction(margins_only(m), 0.3), naive / 50.0, 1e-15);
}

TEST(SelectMargin, OrderStatistics) {
  const auto g = select_margin(margins_only({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), 0.1);
  ASSERT_TRUE(g.has_value());
  EXPECT_LT(*g, 2.0);
  EXPECT_GT(*g, 2.0 - 1e-6);
  const auto h = select_margin(margins_only({5, 5, 5}), 0.0);
  ASSERT_TRUE(h.has_value());
  EXPECT_LT(*h, 5.0);
  EXPECT_GT(*h, 5.0 - 1e-6);
  EXPECT_FALSE(select_margin(margins_only({1.0, -0.5, 2.0}), 0.0).has_value());
}

TEST(RankProxy, Diagonal) {
  DenseLayer l;
  l.weight = Matrix::identity(3);
  l.reference = Matrix(3, 3);
  const LayerSpectrum s = layer_spectrum(Layer{l});
  EXPECT_NEAR(rank_proxy(s, 1.0, Denominator::spectral), 3.0, 1e-12);
  EXPECT_EQ(rank_proxy(s, 0.0, Denominator::spectral), 3.0);
  EXPECT_NEAR(rank_proxy(s, 2.0, Denominator::spectral), 3.0, 1e-12);
}

TEST(RankProxy, MatchesSingularSum) {
  std::mt19937_64 rng(42);
  DenseLayer l;
  l.weight = Matrix::gaussian(4, 5, rng);
  l.reference = Matrix(4, 5);
  const LayerSpectrum s = layer_spectrum(Layer{l});
  const auto sv = singular_values(l.weight);
  double sum = 0.0;
  for (double v : sv) sum += v;
  EXPECT_NEAR(rank_proxy(s, 1.0, Denominator::spectral), sum / sv[0], 1e-9);
  EXPECT_NEAR(rank_proxy(s, 2.0, Denominator::spectral), std::pow(l.weight.frobenius() / sv[0], 2.0), 1e-9);
}

TEST(Rf, OneLayerRankForm) {
  std::mt19937_64 rng(43);
  NetworkSpec net;
  DenseLayer l;
  l.weight = matmul(Matrix::gaussian(3, 2, rng), Matrix::gaussian(2, 5, rng));
  l.reference = Matrix(3, 5);
  net.layers.emplace_back(l);
  net.class_count = 3;
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 8));
  EXPECT_NEAR(rf_dnn(in, {0.0}), std::sqrt((3.0 + 5.0) * 2.0), 1e-12);
  EXPECT_NEAR(rf_dnn_aug(in, {0.5}), rf_dnn(in, {0.5}), 1e-12);
}

TEST(Rf, IdenticalLayersGiveEqualTerms) {
  std::mt19937_64 rng(44);
  NetworkSpec net;
  DenseLayer l;
  l.weight = Matrix::gaussian(4, 4, rng);
  l.reference = Matrix(4, 4);
  l.activation = Activation::identity;
  net.layers.emplace_back(l);
  net.layers.emplace_back(l);
  net.layers.emplace_back(l);
  net.class_count = 4;
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 6));
  EXPECT_NEAR(layer_term(BoundKind::dnn, in, 0, 1.0), layer_term(BoundKind::dnn, in, 1, 1.0), 1e-9);
}

TEST(Rf, AugmentedNotLargerOnRealForward) {
  std::mt19937_64 rng(45);
  for (int k = 0; k < 5; ++k) {
    const NetworkSpec net = dense_net(rng, {5, 8, 6, 3});
    const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 20));
    for (double p : {0.0, 0.5, 1.0, 2.0}) {
      const std::vector<double> pv(3, p);
      EXPECT_LE(rf_dnn_aug(in, pv), rf_dnn(in, pv) * (1.0 + 1e-12));
    }
  }
}

TEST(BoundMain, SampleSizeScaling) {
  std::mt19937_64 rng(46);
  const NetworkSpec net = dense_net(rng, {4, 6, 3});
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 20));
  const std::vector<double> pv = {1.0, 1.0};
  for (std::size_t n : {100u, 1000u, 10000u}) {
    EXPECT_LE(bound_main(BoundKind::dnn, config(4 * n), in, pv).value, 0.75 * bound_main(BoundKind::dnn, config(n), in, pv).value);
  }
}

TEST(BoundMain, ExplicitNotBelowDominant) {
  std::mt19937_64 rng(47);
  for (int k = 0; k < 5; ++k) {
    const NetworkSpec net = dense_net(rng, {5, 7, 3});
    const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 30));
    BoundConfig dom = config(30), ex = config(30);
    ex.mode = BoundMode::explicit_constants;
    for (BoundKind kind : {BoundKind::dnn, BoundKind::dnn_aug}) {
      const std::vector<double> pv = {0.5, 1.5};
      EXPECT_GE(bound_main(kind, ex, in, pv).value, bound_main(kind, dom, in, pv).value);
    }
  }
}

TEST(BoundMain, PrefactorVanishesAtZero) {
  std::mt19937_64 rng(48);
  const NetworkSpec net = dense_net(rng, {4, 5, 3});
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 10));
  const BoundReport r = bound_main(BoundKind::dnn, config(10), in, {0.0, 0.0});
  EXPECT_EQ(r.components.at("prefactor"), 1.0);
}

TEST(BoundLinear, RankFormAtZero) {
  DenseLayer l;
  l.weight = Matrix::diag(3, 5, {2.0, 1.0, 0.0});
  l.reference = Matrix(3, 5);
  const LayerSpectrum s = layer_spectrum(Layer{l});
  const BoundReport r = bound_linear(s, config(50), 3, 5, 0.0, 1.0);
  EXPECT_NEAR(r.value, std::sqrt(2.0 * (3.0 + 5.0) / 50.0), 1e-12);
  EXPECT_EQ(bound_linear(layer_spectrum(Layer{DenseLayer{Matrix(3, 5), Matrix(3, 5)}}), config(50), 3, 5, 1.0, 1.0).value,
            0.0);
}

TEST(BoundLinear, SubstitutionAtOne) {
  DenseLayer l;
  l.weight = Matrix::diag(2, 3, {3.0, 1.0});
  l.reference = Matrix(2, 3);
  const BoundConfig c = config(40);
  const BoundReport r = bound_linear(layer_spectrum(Layer{l}), c, 2, 3, 1.0, 1.5);
  const double lb = 2.0 * 1.5;
  const double want = std::sqrt(std::pow(lb, 2.0 / 3.0) * std::pow(4.0, 2.0 / 3.0) * std::pow(2.0, 1.0 / 3.0) *
                                std::pow(5.0, 2.0 / 3.0) / 40.0);
  EXPECT_NEAR(r.value, want, 1e-12);
}

TEST(Misclassification, AddsAndFlags) {
  const ActivationStats s = margins_only({-1.0, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5, 5});
  const MisclassificationBound m = misclassification_bound(0.1, s, 1.0);
  EXPECT_NEAR(m.value, 0.15, 1e-15);
  EXPECT_FALSE(m.vacuous);
  EXPECT_TRUE(misclassification_bound(2.0, s, 1.0).vacuous);
}

TEST(Baselines, LeiLinear) {
  std::mt19937_64 rng(49);
  NetworkSpec net = dense_net(rng, {4, 3});
  const ActivationStats st = stats_for(net, rng, 25);
  const AnalysisInputs in = prepare_inputs(net, st);
  const BoundReport r = baseline("lei_linear", in, config(25));
  EXPECT_NEAR(r.value, 2.0 * st.input_bound * layer_weight(net.layers[0]).frobenius() / 5.0, 1e-12);
}

TEST(Baselines, GolowichGrowsGeometrically) {
  const Matrix a = Matrix::diag({1.5, 1.0});
  std::mt19937_64 rng(50);
  const Matrix x = Matrix::gaussian(10, 2, rng);
  std::vector<int> labels(10, 0);
  std::vector<double> vals;
  for (int depth = 1; depth <= 4; ++depth) {
    NetworkSpec net;
    for (int i = 0; i < depth; ++i) net.layers.emplace_back(DenseLayer{a, Matrix(2, 2), Activation::identity, 1.0});
    net.class_count = 2;
    vals.push_back(baseline("golowich", prepare_inputs(net, activation_stats(net, x, labels)), config(10)).value);
  }
  for (int k = 1; k < 4; ++k)
    EXPECT_NEAR(vals[k] / vals[k - 1], a.frobenius() * std::sqrt((k + 1.0) / k), 1e-9);
}

TEST(Baselines, GrafAndLongSedghiAgreeUpToFactor) {
  NetworkSpec net;
  for (int i = 0; i < 3; ++i) net.layers.emplace_back(DenseLayer{Matrix::identity(3), Matrix(3, 3), Activation::identity, 1.0});
  net.class_count = 3;
  std::mt19937_64 rng(51);
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 12));
  const double g = baseline("graf", in, config(12)).value;
  const double l = baseline("long_sedghi", in, config(12)).value;
  const BoundReport r = baseline("long_sedghi", in, config(12));
  EXPECT_NEAR(l, g * std::sqrt(r.components.at("S")), 1e-12);
  EXPECT_EQ(r.components.at("S"), 1.0);
}

TEST(OptimizeP, TwoPointGrid) {
  std::mt19937_64 rng(52);
  const NetworkSpec net = dense_net(rng, {5, 6, 3});
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 20));
  BoundConfig c = config(20);
  c.p_grid_step = 2.0;
  EXPECT_EQ(p_grid(2.0), (std::vector<double>{0.0, 2.0}));
  double best = INFINITY;
  for (double a : {0.0, 2.0})
    for (double b : {0.0, 2.0}) best = std::min(best, bound_main(BoundKind::dnn, c, in, {a, b}).value);
  EXPECT_NEAR(optimize_p(BoundKind::dnn, c, in).value, best, 1e-12 * best);
}

TEST(OptimizeP, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(53);
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    std::vector<std::size_t> widths = {4};
    for (std::size_t i = 0; i < depth; ++i) widths.push_back(i + 1 == depth ? 3 : 6);
    const NetworkSpec net = dense_net(rng, widths);
    const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 15));
    BoundConfig c = config(15);
    c.p_grid_step = 0.5;
    const auto grid = p_grid(0.5);
    for (BoundKind kind : {BoundKind::dnn, BoundKind::dnn_aug}) {
      double best = INFINITY;
      std::vector<std::size_t> idx(depth, 0);
      while (true) {
        std::vector<double> pv(depth);
        for (std::size_t i = 0; i < depth; ++i) pv[i] = grid[idx[i]];
        best = std::min(best, bound_main(kind, c, in, pv).value);
        std::size_t j = 0;
        while (j < depth && ++idx[j] == grid.size()) idx[j++] = 0;
        if (j == depth) break;
      }
      EXPECT_NEAR(optimize_p(kind, c, in).value, best, 1e-12 * best);
    }
  }
}

TEST(OptimizeP, LowRankPrefersZero) {
  std::mt19937_64 rng(54);
  NetworkSpec net;
  for (std::size_t i = 0; i < 2; ++i) {
    DenseLayer l;
    l.weight = 50.0 * matmul(Matrix::gaussian(8, 1, rng), Matrix::gaussian(1, 8, rng));
    l.reference = Matrix(8, 8);
    net.layers.emplace_back(l);
  }
  net.class_count = 8;
  const AnalysisInputs in = prepare_inputs(net, stats_for(net, rng, 10));
  const PGridResult r = optimize_p(BoundKind::dnn, config(10), in);
  for (double p : r.p_vec) EXPECT_EQ(p, 0.0);
}

TEST(PGrid, RejectsBadStep) {
  EXPECT_THROW(p_grid(0.0), std::invalid_argument);
  EXPECT_THROW(p_grid(2.5), std::invalid_argument);
  EXPECT_EQ(p_grid(0.05).size(), 41u);
}

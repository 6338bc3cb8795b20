#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scert/trainer.hpp"
#include "scert/variational.hpp"

namespace scert {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::size_t instances = 0;
  std::size_t violations = 0;
  std::string detail;
  double seconds = 0.0;
};

struct TrainedFixture {
  NetworkSpec net;
  Dataset train;
  Dataset test;
};

// Small dense nets trained on separated Gaussian clusters, one per seed.
std::vector<TrainedFixture> trained_fixtures(std::size_t count, std::uint64_t seed);

// Analytic balanced factorization and the descent oracle against L‖A‖_{S,2/L}^{2/L}.
CheckResult check_variational(std::size_t instances = 100, std::uint64_t seed = 1, DescentOptions opt = {});
// Weighted Schatten objective of the analytic factors against ‖A‖_{S,p}^p.
CheckResult check_schatten_identity(std::size_t instances = 50, std::uint64_t seed = 2);
CheckResult check_decomposition(std::size_t instances = 200, std::uint64_t seed = 3);
// Greedy cover of lattice classes against the closed-form bound at half the radius.
CheckResult check_cover_domination(std::uint64_t seed = 4, bool quick = false);
CheckResult check_conv_operator(std::size_t instances = 20, std::uint64_t seed = 5);
CheckResult check_gradient(std::uint64_t seed = 6);
CheckResult check_bound_algebra(const std::vector<TrainedFixture>& nets, std::uint64_t seed = 7);
CheckResult check_misclassification(const std::vector<TrainedFixture>& nets);

struct SweepCheckOptions {
  std::size_t narrow = 8;
  std::size_t wide = 64;
  std::vector<double> decays = {0.0, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1};
  double max_growth_ratio = 0.6;
  double accuracy_window = 0.02;
  std::uint64_t seed = 8;
};

CheckResult check_rank_sweep(SweepCheckOptions opt = {});

}  // namespace scert

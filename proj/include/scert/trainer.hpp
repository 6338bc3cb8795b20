#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scert/matrix.hpp"
#include "scert/netmodel.hpp"

namespace scert {

struct Dataset {
  Matrix inputs;            // N × d
  std::vector<int> labels;  // N
  std::size_t size() const { return labels.size(); }
};

struct SynthOptions {
  double center_radius = 1.0;
  double noise_std = 1.0;
  double min_separation = 1.0;
};

// Gaussian clusters around random centers of norm center_radius, pairwise at least
// min_separation apart. Labels cycle through the classes.
Dataset synth_dataset(std::size_t classes, std::size_t dim, std::size_t n, std::uint64_t seed, SynthOptions opt = {});
Dataset subset(const Dataset& d, std::size_t begin, std::size_t end);

struct ConvStage {
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int pool = 0;  // 0 = no pooling, else max-pool window size
  int pool_stride = 0;  // 0 = same as pool
};

struct ArchitectureDescriptor {
  std::size_t input_dim = 2;
  int in_channels = 1;  // image geometry, used only with conv stages
  int in_height = 0;
  int in_width = 0;
  std::vector<ConvStage> conv;
  std::vector<std::size_t> hidden;
  int linear_prefix = 0;  // identity layers inserted before each nonlinear hidden layer
  Activation activation = Activation::relu;
  std::size_t classes = 2;
};

NetworkSpec build_network(const ArchitectureDescriptor& arch, std::uint64_t seed);

struct TrainConfig {
  int epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double weight_decay = 0.0;
  std::optional<double> spectral_cap;
  std::uint64_t seed = 1;
  ArchitectureDescriptor arch;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossGrad {
  double loss = 0.0;  // mean cross-entropy + λ Σ‖A_ℓ‖_F²
  std::vector<Matrix> grads;
};

LossGrad loss_and_gradient(const NetworkSpec& net, const Matrix& inputs, const std::vector<int>& labels,
                           const std::vector<std::size_t>& batch, double weight_decay);
double total_loss(const NetworkSpec& net, const Matrix& inputs, const std::vector<int>& labels, double weight_decay);
double accuracy(const NetworkSpec& net, const Dataset& data);

struct TrainResult {
  NetworkSpec net;
  std::vector<double> epoch_loss;  // full-data objective after each epoch; entry 0 is the initial value
};

TrainResult sgd_train(NetworkSpec net, const Dataset& data, const TrainConfig& cfg);

struct SweepRow {
  std::size_t width = 0;
  double weight_decay = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<int> effective_ranks;  // numeric rank at 1e-3
  std::vector<int> ranks;            // numeric rank at the default tolerance
  double margin = 0.0;
  double bound_dnn = 0.0;
  double bound_dnn_aug = 0.0;
  double bound_rank = 0.0;
  double graf = 0.0;
  double long_sedghi = 0.0;
  std::vector<double> chosen_p;
  bool selected = false;
  NetworkSpec net;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<std::size_t> widths_without_selection;
};

// Trains every (width, λ) cell; hidden widths of base.arch are all replaced by width. Per width the
// highest λ with test accuracy ≥ accuracy_floor is marked selected.
SweepReport rank_sweep(const TrainConfig& base, const std::vector<std::size_t>& widths, const std::vector<double>& decays,
                       const Dataset& train, const Dataset& test, double accuracy_floor = 0.9, double delta = 0.01);

}  // namespace scert

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scert/matrix.hpp"

namespace scert {

enum class Activation { relu, identity, abs };
enum class PoolKind { none, max };

Activation parse_activation(const std::string& name);  // throws std::invalid_argument
std::string to_string(Activation a);
PoolKind parse_pool(const std::string& name);
std::string to_string(PoolKind p);

struct DenseLayer {
  Matrix weight;     // w_out × w_in
  Matrix reference;  // same shape, zero by default
  Activation activation = Activation::relu;
  double rho = 1.0;
};

// Spatial description used to generate patch and pooling index lists.
struct ConvGeometry {
  int in_channels = 1;
  int in_height = 1;
  int in_width = 1;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  PoolKind pool = PoolKind::none;
  int pool_size = 1;
  int pool_stride = 1;

  int out_height() const { return (in_height - kernel_h) / stride + 1; }
  int out_width() const { return (in_width - kernel_w) / stride + 1; }
  int pooled_height() const;
  int pooled_width() const;
};

struct ConvLayer {
  Matrix filter;     // U_out × d (d = in_channels · kernel area)
  Matrix reference;  // same shape
  std::vector<std::vector<int>> patches;       // O lists of length d, into the flattened input
  PoolKind pooling = PoolKind::none;
  std::vector<std::vector<int>> pool_windows;  // w_out lists of conv output positions
  Activation activation = Activation::relu;
  double rho = 1.0;
  int in_channels = 1;
  int in_spatial = 1;
  std::optional<ConvGeometry> geometry;

  std::size_t out_channels() const { return filter.rows(); }
  std::size_t patch_dim() const { return filter.cols(); }
  std::size_t patch_count() const { return patches.size(); }
  std::size_t out_spatial() const { return pooling == PoolKind::none ? patches.size() : pool_windows.size(); }
  std::size_t input_size() const { return static_cast<std::size_t>(in_channels) * in_spatial; }
  std::size_t output_size() const { return out_channels() * out_spatial(); }
};

// Patches in row-major spatial order; within a patch, channel-major then row then column.
std::vector<std::vector<int>> make_patches(int channels, int height, int width, int kernel_h, int kernel_w, int stride);
std::vector<std::vector<int>> make_pool_windows(int height, int width, int size, int stride);
ConvLayer make_conv_layer(const ConvGeometry& g, Matrix filter, Activation act = Activation::relu, double rho = 1.0);

using Layer = std::variant<DenseLayer, ConvLayer>;

bool is_conv(const Layer& l);
const Matrix& layer_weight(const Layer& l);
Matrix& layer_weight(Layer& l);
const Matrix& layer_reference(const Layer& l);
double layer_rho(const Layer& l);
Activation layer_activation(const Layer& l);
std::size_t layer_input_size(const Layer& l);
std::size_t layer_output_size(const Layer& l);

struct NetworkSpec {
  std::vector<Layer> layers;
  int class_count = 0;
  bool last_activation = false;  // apply σ_L on the final layer

  std::size_t depth() const { return layers.size(); }
  std::size_t input_size() const;
  bool has_conv() const;
  void validate() const;  // throws std::invalid_argument
};

std::vector<double> apply_activation(Activation a, std::vector<double> v);

std::vector<double> conv_apply(const ConvLayer& layer, const std::vector<double>& x);     // U × O, row-major
std::vector<double> conv_adjoint(const ConvLayer& layer, const std::vector<double>& y);   // back to input size
std::vector<double> conv_pool(const ConvLayer& layer, const std::vector<double>& act);    // U × O -> U × w_out
Matrix conv_materialize(const ConvLayer& layer);
double conv_operator_spectral_norm(const ConvLayer& layer, double rel_tol = 1e-8);

std::vector<double> layer_forward(const Layer& l, const std::vector<double>& x, bool apply_act);

struct ForwardTrace {
  std::vector<std::vector<double>> post;  // post[ℓ-1] = F^{0→ℓ}(x)
};

ForwardTrace forward_trace(const NetworkSpec& net, const std::vector<double>& x);
std::vector<double> forward(const NetworkSpec& net, const std::vector<double>& x);

std::size_t argmax_smallest(const std::vector<double>& scores);
double score_margin(const std::vector<double>& scores, std::size_t y);

struct ActivationStats {
  double input_bound = 0.0;                // 𝔅
  std::vector<double> layer_bounds;        // B̃_0..B̃_L, each floored at 1 (B̃_0 = max(𝔅,1))
  std::vector<double> conv_patch_bounds;   // entry ℓ-1: max patch norm entering layer ℓ, floored at 1
  double input_patch_bound = 0.0;          // B̲
  std::vector<double> margins;
  std::vector<int> predictions;
  std::vector<int> labels;

  std::size_t sample_count() const { return margins.size(); }
  double error_rate() const;
};

ActivationStats activation_stats(const NetworkSpec& net, const Matrix& inputs, const std::vector<int>& labels);

struct ArchitectureSummary {
  std::vector<std::size_t> widths;       // flattened sizes, widths[0] = input
  std::vector<std::size_t> channels;     // U_ℓ
  std::vector<std::size_t> patch_dim;    // d_{ℓ-1}
  std::vector<std::size_t> patch_count;  // O_{ℓ-1}
  std::vector<std::size_t> spatial;      // w_ℓ (spatial positions after pooling; 1 for dense)
  std::vector<double> big_w;             // W_ℓ = U_ℓ·w_ℓ, W_L = 1
  std::vector<double> kernel_area;       // q_ℓ, 1 for dense
  double total_params = 0.0;             // 𝒲
  double total_preacts = 0.0;            // 𝒜
  double max_width = 0.0;

  std::size_t depth() const { return channels.size(); }
  // Layer index i is zero-based (layer ℓ = i + 1).
  double wbar(std::size_t i) const { return static_cast<double>(widths[i + 1] + widths[i]); }
  double wmin(std::size_t i) const;
  double wtilde(std::size_t i) const;
};

ArchitectureSummary summarize(const NetworkSpec& net);

}  // namespace scert

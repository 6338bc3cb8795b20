#include "scert/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scert/linalg.hpp"

namespace scert {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "abs") return Activation::abs;
  throw std::invalid_argument("unknown activation: " + name);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::abs: return "abs";
  }
  return "identity";
}

PoolKind parse_pool(const std::string& name) {
  if (name == "none") return PoolKind::none;
  if (name == "max") return PoolKind::max;
  throw std::invalid_argument("unknown pooling: " + name);
}

std::string to_string(PoolKind p) { return p == PoolKind::max ? "max" : "none"; }

int ConvGeometry::pooled_height() const {
  return pool == PoolKind::none ? out_height() : (out_height() - pool_size) / pool_stride + 1;
}

int ConvGeometry::pooled_width() const {
  return pool == PoolKind::none ? out_width() : (out_width() - pool_size) / pool_stride + 1;
}

std::vector<std::vector<int>> make_patches(int channels, int height, int width, int kernel_h, int kernel_w, int stride) {
  if (channels <= 0 || kernel_h <= 0 || kernel_w <= 0 || stride <= 0 || kernel_h > height || kernel_w > width)
    throw std::invalid_argument("make_patches: invalid geometry");
  std::vector<std::vector<int>> out;
  for (int r = 0; r + kernel_h <= height; r += stride)
    for (int c = 0; c + kernel_w <= width; c += stride) {
      std::vector<int> idx;
      idx.reserve(static_cast<std::size_t>(channels * kernel_h * kernel_w));
      for (int ch = 0; ch < channels; ++ch)
        for (int kr = 0; kr < kernel_h; ++kr)
          for (int kc = 0; kc < kernel_w; ++kc) idx.push_back(ch * height * width + (r + kr) * width + (c + kc));
      out.push_back(std::move(idx));
    }
  return out;
}

std::vector<std::vector<int>> make_pool_windows(int height, int width, int size, int stride) {
  if (size <= 0 || stride <= 0 || size > height || size > width) throw std::invalid_argument("make_pool_windows: invalid geometry");
  std::vector<std::vector<int>> out;
  for (int r = 0; r + size <= height; r += stride)
    for (int c = 0; c + size <= width; c += stride) {
      std::vector<int> idx;
      for (int kr = 0; kr < size; ++kr)
        for (int kc = 0; kc < size; ++kc) idx.push_back((r + kr) * width + (c + kc));
      out.push_back(std::move(idx));
    }
  return out;
}

ConvLayer make_conv_layer(const ConvGeometry& g, Matrix filter, Activation act, double rho) {
  ConvLayer l;
  const std::size_t d = static_cast<std::size_t>(g.in_channels * g.kernel_h * g.kernel_w);
  if (filter.cols() != d) throw std::invalid_argument("make_conv_layer: filter width does not match patch size");
  l.reference = Matrix(filter.rows(), filter.cols());
  l.filter = std::move(filter);
  l.patches = make_patches(g.in_channels, g.in_height, g.in_width, g.kernel_h, g.kernel_w, g.stride);
  l.pooling = g.pool;
  if (g.pool == PoolKind::max) l.pool_windows = make_pool_windows(g.out_height(), g.out_width(), g.pool_size, g.pool_stride);
  l.activation = act;
  l.rho = rho;
  l.in_channels = g.in_channels;
  l.in_spatial = g.in_height * g.in_width;
  l.geometry = g;
  return l;
}

bool is_conv(const Layer& l) { return std::holds_alternative<ConvLayer>(l); }

const Matrix& layer_weight(const Layer& l) {
  return is_conv(l) ? std::get<ConvLayer>(l).filter : std::get<DenseLayer>(l).weight;
}

Matrix& layer_weight(Layer& l) {
  return is_conv(l) ? std::get<ConvLayer>(l).filter : std::get<DenseLayer>(l).weight;
}

const Matrix& layer_reference(const Layer& l) {
  return is_conv(l) ? std::get<ConvLayer>(l).reference : std::get<DenseLayer>(l).reference;
}

double layer_rho(const Layer& l) { return is_conv(l) ? std::get<ConvLayer>(l).rho : std::get<DenseLayer>(l).rho; }

Activation layer_activation(const Layer& l) {
  return is_conv(l) ? std::get<ConvLayer>(l).activation : std::get<DenseLayer>(l).activation;
}

std::size_t layer_input_size(const Layer& l) {
  return is_conv(l) ? std::get<ConvLayer>(l).input_size() : std::get<DenseLayer>(l).weight.cols();
}

std::size_t layer_output_size(const Layer& l) {
  return is_conv(l) ? std::get<ConvLayer>(l).output_size() : std::get<DenseLayer>(l).weight.rows();
}

std::size_t NetworkSpec::input_size() const { return layers.empty() ? 0 : layer_input_size(layers.front()); }

bool NetworkSpec::has_conv() const { return std::any_of(layers.begin(), layers.end(), is_conv); }

void NetworkSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  if (is_conv(layers.back())) throw std::invalid_argument("last layer must be dense");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    const Matrix& w = layer_weight(l);
    const Matrix& m = layer_reference(l);
    if (w.empty()) throw std::invalid_argument("layer " + std::to_string(i) + ": empty weight");
    if (m.rows() != w.rows() || m.cols() != w.cols())
      throw std::invalid_argument("layer " + std::to_string(i) + ": reference shape differs from weight");
    if (!(layer_rho(l) >= 0.0)) throw std::invalid_argument("layer " + std::to_string(i) + ": negative rho");
    if (i > 0 && layer_input_size(l) != layer_output_size(layers[i - 1]))
      throw std::invalid_argument("layer " + std::to_string(i) + ": input size does not chain with previous layer");
    if (is_conv(l)) {
      const auto& c = std::get<ConvLayer>(l);
      const int in = static_cast<int>(c.input_size());
      for (const auto& p : c.patches) {
        if (p.size() != c.patch_dim()) throw std::invalid_argument("conv patch length differs from filter width");
        for (int idx : p)
          if (idx < 0 || idx >= in) throw std::invalid_argument("conv patch index out of range");
      }
      if (c.pooling == PoolKind::max) {
        std::vector<char> seen(c.patch_count(), 0);
        for (const auto& win : c.pool_windows)
          for (int idx : win) {
            if (idx < 0 || idx >= static_cast<int>(c.patch_count())) throw std::invalid_argument("pool index out of range");
            seen[static_cast<std::size_t>(idx)] = 1;
          }
        if (std::find(seen.begin(), seen.end(), 0) != seen.end())
          throw std::invalid_argument("pool windows do not cover every conv position");
      }
    }
  }
  if (static_cast<int>(layer_output_size(layers.back())) != class_count)
    throw std::invalid_argument("last layer output does not equal class_count");
}

std::vector<double> apply_activation(Activation a, std::vector<double> v) {
  switch (a) {
    case Activation::relu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      break;
    case Activation::abs:
      for (double& x : v) x = std::abs(x);
      break;
    case Activation::identity: break;
  }
  return v;
}

std::vector<double> conv_apply(const ConvLayer& layer, const std::vector<double>& x) {
  if (x.size() != layer.input_size()) throw std::invalid_argument("conv_apply: input size mismatch");
  const std::size_t u = layer.out_channels(), o_count = layer.patch_count(), d = layer.patch_dim();
  std::vector<double> out(u * o_count, 0.0);
  std::vector<double> patch(d);
  for (std::size_t o = 0; o < o_count; ++o) {
    const auto& idx = layer.patches[o];
    for (std::size_t i = 0; i < d; ++i) {
      const int k = idx[i];
      if (k < 0 || static_cast<std::size_t>(k) >= x.size()) throw std::out_of_range("conv_apply: patch index out of range");
      patch[i] = x[static_cast<std::size_t>(k)];
    }
    for (std::size_t j = 0; j < u; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) s += patch[i] * layer.filter(j, i);
      out[j * o_count + o] = s;
    }
  }
  return out;
}

std::vector<double> conv_adjoint(const ConvLayer& layer, const std::vector<double>& y) {
  const std::size_t u = layer.out_channels(), o_count = layer.patch_count(), d = layer.patch_dim();
  if (y.size() != u * o_count) throw std::invalid_argument("conv_adjoint: size mismatch");
  std::vector<double> x(layer.input_size(), 0.0);
  for (std::size_t o = 0; o < o_count; ++o) {
    const auto& idx = layer.patches[o];
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < u; ++j) s += layer.filter(j, i) * y[j * o_count + o];
      x[static_cast<std::size_t>(idx[i])] += s;
    }
  }
  return x;
}

std::vector<double> conv_pool(const ConvLayer& layer, const std::vector<double>& act) {
  if (layer.pooling == PoolKind::none) return act;
  const std::size_t u = layer.out_channels(), o_count = layer.patch_count(), w = layer.pool_windows.size();
  std::vector<double> out(u * w);
  for (std::size_t j = 0; j < u; ++j)
    for (std::size_t q = 0; q < w; ++q) {
      double best = -std::numeric_limits<double>::infinity();
      for (int o : layer.pool_windows[q]) best = std::max(best, act[j * o_count + static_cast<std::size_t>(o)]);
      out[j * w + q] = best;
    }
  return out;
}

Matrix conv_materialize(const ConvLayer& layer) {
  const std::size_t u = layer.out_channels(), o_count = layer.patch_count(), d = layer.patch_dim();
  const double entries = static_cast<double>(u * o_count) * static_cast<double>(layer.input_size());
  if (entries > 1e7) throw std::length_error("conv_materialize: operator exceeds the 1e7-entry guard");
  Matrix m(u * o_count, layer.input_size());
  for (std::size_t o = 0; o < o_count; ++o)
    for (std::size_t i = 0; i < d; ++i) {
      const auto col = static_cast<std::size_t>(layer.patches[o][i]);
      for (std::size_t j = 0; j < u; ++j) m(j * o_count + o, col) += layer.filter(j, i);
    }
  return m;
}

double conv_operator_spectral_norm(const ConvLayer& layer, double rel_tol) {
  PowerOptions opt;
  opt.rel_tol = rel_tol;
  return operator_norm_power([&](const std::vector<double>& x) { return conv_apply(layer, x); },
                             [&](const std::vector<double>& y) { return conv_adjoint(layer, y); }, layer.input_size(),
                             opt);
}

std::vector<double> layer_forward(const Layer& l, const std::vector<double>& x, bool apply_act) {
  if (is_conv(l)) {
    const auto& c = std::get<ConvLayer>(l);
    std::vector<double> z = conv_apply(c, x);
    if (apply_act) z = apply_activation(c.activation, std::move(z));
    return conv_pool(c, z);
  }
  const auto& d = std::get<DenseLayer>(l);
  if (x.size() != d.weight.cols()) throw std::invalid_argument("dense layer: input size mismatch");
  std::vector<double> z = matvec(d.weight, x);
  return apply_act ? apply_activation(d.activation, std::move(z)) : z;
}

ForwardTrace forward_trace(const NetworkSpec& net, const std::vector<double>& x) {
  if (x.size() != net.input_size()) throw std::invalid_argument("forward: input size mismatch");
  ForwardTrace t;
  std::vector<double> h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const bool last = i + 1 == net.layers.size();
    h = layer_forward(net.layers[i], h, !last || net.last_activation);
    t.post.push_back(h);
  }
  return t;
}

std::vector<double> forward(const NetworkSpec& net, const std::vector<double>& x) {
  ForwardTrace t = forward_trace(net, x);
  return t.post.back();
}

std::size_t argmax_smallest(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

double score_margin(const std::vector<double>& scores, std::size_t y) {
  if (y >= scores.size()) throw std::out_of_range("score_margin: class index out of range");
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != y) other = std::max(other, scores[i]);
  return scores[y] - other;
}

double ActivationStats::error_rate() const {
  if (predictions.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) wrong += predictions[i] != labels[i];
  return static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

namespace {

double max_patch_norm(const Layer& l, const std::vector<double>& h) {
  if (!is_conv(l)) return norm2(h);
  double best = 0.0;
  for (const auto& p : std::get<ConvLayer>(l).patches) {
    double s = 0.0;
    for (int k : p) s += h[static_cast<std::size_t>(k)] * h[static_cast<std::size_t>(k)];
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

}  // namespace

ActivationStats activation_stats(const NetworkSpec& net, const Matrix& inputs, const std::vector<int>& labels) {
  if (inputs.rows() == 0) throw std::invalid_argument("activation_stats: empty dataset");
  if (labels.size() != inputs.rows()) throw std::invalid_argument("activation_stats: label count mismatch");
  const std::size_t L = net.depth();
  ActivationStats s;
  s.layer_bounds.assign(L + 1, 0.0);
  s.conv_patch_bounds.assign(L, 0.0);
  s.labels = labels;
  for (std::size_t n = 0; n < inputs.rows(); ++n) {
    const std::vector<double> x = inputs.row(n);
    const double xn = norm2(x);
    s.input_bound = std::max(s.input_bound, xn);
    s.input_patch_bound = std::max(s.input_patch_bound, max_patch_norm(net.layers[0], x));
    ForwardTrace t = forward_trace(net, x);
    for (std::size_t i = 0; i < L; ++i) {
      s.layer_bounds[i + 1] = std::max(s.layer_bounds[i + 1], norm2(t.post[i]));
      const std::vector<double>& in = i == 0 ? x : t.post[i - 1];
      s.conv_patch_bounds[i] = std::max(s.conv_patch_bounds[i], max_patch_norm(net.layers[i], in));
    }
    const auto& scores = t.post.back();
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= scores.size()) throw std::out_of_range("activation_stats: label out of range");
    s.margins.push_back(score_margin(scores, static_cast<std::size_t>(y)));
    s.predictions.push_back(static_cast<int>(argmax_smallest(scores)));
  }
  s.layer_bounds[0] = s.input_bound;
  for (double& b : s.layer_bounds) b = std::max(b, 1.0);
  for (double& b : s.conv_patch_bounds) b = std::max(b, 1.0);
  return s;
}

double ArchitectureSummary::wmin(std::size_t i) const {
  return static_cast<double>(std::min(widths[i + 1], widths[i]));
}

double ArchitectureSummary::wtilde(std::size_t i) const {
  if (i + 1 == depth()) return wmin(i);
  return static_cast<double>(widths[i + 1]) * static_cast<double>(widths[i]);
}

ArchitectureSummary summarize(const NetworkSpec& net) {
  ArchitectureSummary a;
  const std::size_t L = net.depth();
  a.widths.push_back(net.input_size());
  a.total_preacts = static_cast<double>(net.input_size());
  a.max_width = static_cast<double>(net.input_size());
  for (std::size_t i = 0; i < L; ++i) {
    const Layer& l = net.layers[i];
    a.widths.push_back(layer_output_size(l));
    if (is_conv(l)) {
      const auto& c = std::get<ConvLayer>(l);
      a.channels.push_back(c.out_channels());
      a.patch_dim.push_back(c.patch_dim());
      a.patch_count.push_back(c.patch_count());
      a.spatial.push_back(c.out_spatial());
      a.kernel_area.push_back(static_cast<double>(c.patch_dim()) / c.in_channels);
    } else {
      const auto& d = std::get<DenseLayer>(l);
      a.channels.push_back(d.weight.rows());
      a.patch_dim.push_back(d.weight.cols());
      a.patch_count.push_back(1);
      a.spatial.push_back(1);
      a.kernel_area.push_back(1.0);
    }
    const double u = static_cast<double>(a.channels.back());
    a.big_w.push_back(i + 1 == L ? 1.0 : u * static_cast<double>(a.spatial.back()));
    a.total_params += static_cast<double>(a.patch_dim.back()) * u;
    const double preacts = u * static_cast<double>(a.patch_count.back());
    a.total_preacts += preacts;
    a.max_width = std::max({a.max_width, preacts, static_cast<double>(a.widths.back())});
  }
  return a;
}

}  // namespace scert

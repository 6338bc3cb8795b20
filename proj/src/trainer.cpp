#include "scert/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "scert/bounds.hpp"
#include "scert/linalg.hpp"
#include "scert/parallel.hpp"
#include "scert/popt.hpp"

namespace scert {

Dataset synth_dataset(std::size_t classes, std::size_t dim, std::size_t n, std::uint64_t seed, SynthOptions opt) {
  if (classes == 0 || dim == 0) throw std::invalid_argument("synth_dataset: empty shape");
  if (n < classes) throw std::invalid_argument("synth_dataset: need at least one sample per class");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> centers;
  for (int attempt = 0; centers.size() < classes; ++attempt) {
    if (attempt > 100000) throw std::runtime_error("synth_dataset: could not place separated centers");
    std::vector<double> c(dim);
    for (double& v : c) v = nd(rng);
    const double cn = norm2(c);
    if (cn == 0.0) continue;
    for (double& v : c) v *= opt.center_radius / cn;
    bool ok = true;
    for (const auto& other : centers) {
      double dist = 0.0;
      for (std::size_t k = 0; k < dim; ++k) dist += (c[k] - other[k]) * (c[k] - other[k]);
      if (std::sqrt(dist) < opt.min_separation) ok = false;
    }
    if (ok) centers.push_back(std::move(c));
  }
  Dataset d;
  d.inputs = Matrix(n, dim);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % classes);
    d.labels[i] = y;
    for (std::size_t k = 0; k < dim; ++k) d.inputs(i, k) = centers[static_cast<std::size_t>(y)][k] + opt.noise_std * nd(rng);
  }
  return d;
}

Dataset subset(const Dataset& d, std::size_t begin, std::size_t end) {
  end = std::min(end, d.size());
  Dataset out;
  out.inputs = Matrix(end - begin, d.inputs.cols());
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t k = 0; k < d.inputs.cols(); ++k) out.inputs(i - begin, k) = d.inputs(i, k);
    out.labels.push_back(d.labels[i]);
  }
  return out;
}

NetworkSpec build_network(const ArchitectureDescriptor& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetworkSpec net;
  net.class_count = static_cast<int>(arch.classes);
  std::size_t in = arch.input_dim;
  int ch = arch.in_channels, h = arch.in_height, w = arch.in_width;
  if (!arch.conv.empty()) {
    if (static_cast<std::size_t>(ch * h * w) != arch.input_dim) throw std::invalid_argument("build_network: image geometry differs from input_dim");
    for (const ConvStage& st : arch.conv) {
      ConvGeometry g;
      g.in_channels = ch;
      g.in_height = h;
      g.in_width = w;
      g.kernel_h = g.kernel_w = st.kernel;
      g.stride = st.stride;
      if (st.pool > 0) {
        g.pool = PoolKind::max;
        g.pool_size = st.pool;
        g.pool_stride = st.pool_stride > 0 ? st.pool_stride : st.pool;
      }
      const std::size_t d = static_cast<std::size_t>(ch * st.kernel * st.kernel);
      Matrix f = Matrix::gaussian(static_cast<std::size_t>(st.out_channels), d, rng, std::sqrt(2.0 / static_cast<double>(d)));
      net.layers.emplace_back(make_conv_layer(g, std::move(f), arch.activation));
      ch = st.out_channels;
      h = g.pooled_height();
      w = g.pooled_width();
      in = static_cast<std::size_t>(ch * h * w);
    }
  }
  auto dense = [&](std::size_t out, Activation act) {
    DenseLayer l;
    const double sd = act == Activation::identity ? 1.0 / std::sqrt(static_cast<double>(in)) : std::sqrt(2.0 / static_cast<double>(in));
    l.weight = Matrix::gaussian(out, in, rng, sd);
    l.reference = Matrix(out, in);
    l.activation = act;
    net.layers.emplace_back(std::move(l));
    in = out;
  };
  for (std::size_t width : arch.hidden) {
    for (int k = 0; k < arch.linear_prefix; ++k) dense(width, Activation::identity);
    dense(width, arch.activation);
  }
  dense(arch.classes, Activation::identity);
  net.validate();
  return net;
}

namespace {

double act_deriv(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::abs: return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

struct LayerCache {
  std::vector<double> input;
  std::vector<double> pre;          // pre-activation (U × O for conv)
  std::vector<std::size_t> pool_src;  // for conv max pooling: source index per pooled output
};

std::vector<double> softmax(const std::vector<double>& s) {
  const double mx = *std::max_element(s.begin(), s.end());
  std::vector<double> e(s.size());
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) total += (e[i] = std::exp(s[i] - mx));
  for (double& v : e) v /= total;
  return e;
}

double cross_entropy(const std::vector<double>& s, int y) {
  const double mx = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (double v : s) total += std::exp(v - mx);
  return std::log(total) + mx - s[static_cast<std::size_t>(y)];
}

double penalty(const NetworkSpec& net) {
  double p = 0.0;
  for (const Layer& l : net.layers) {
    const double f = layer_weight(l).frobenius();
    p += f * f;
  }
  return p;
}

}  // namespace

LossGrad loss_and_gradient(const NetworkSpec& net, const Matrix& inputs, const std::vector<int>& labels,
                           const std::vector<std::size_t>& batch, double weight_decay) {
  const std::size_t L = net.depth();
  LossGrad out;
  for (const Layer& l : net.layers) out.grads.emplace_back(layer_weight(l).rows(), layer_weight(l).cols());
  if (batch.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  std::vector<LayerCache> cache(L);
  for (std::size_t n : batch) {
    std::vector<double> h = inputs.row(n);
    for (std::size_t i = 0; i < L; ++i) {
      const bool act_on = i + 1 < L || net.last_activation;
      cache[i].input = h;
      const Layer& l = net.layers[i];
      if (is_conv(l)) {
        const auto& c = std::get<ConvLayer>(l);
        cache[i].pre = conv_apply(c, h);
        std::vector<double> a = act_on ? apply_activation(c.activation, cache[i].pre) : cache[i].pre;
        if (c.pooling == PoolKind::max) {
          const std::size_t U = c.out_channels(), O = c.patch_count(), W = c.pool_windows.size();
          h.assign(U * W, 0.0);
          cache[i].pool_src.assign(U * W, 0);
          for (std::size_t j = 0; j < U; ++j)
            for (std::size_t q = 0; q < W; ++q) {
              std::size_t best = j * O + static_cast<std::size_t>(c.pool_windows[q][0]);
              for (int o : c.pool_windows[q]) {
                const std::size_t idx = j * O + static_cast<std::size_t>(o);
                if (a[idx] > a[best]) best = idx;
              }
              h[j * W + q] = a[best];
              cache[i].pool_src[j * W + q] = best;
            }
        } else {
          h = std::move(a);
        }
      } else {
        const auto& d = std::get<DenseLayer>(l);
        cache[i].pre = matvec(d.weight, h);
        h = act_on ? apply_activation(d.activation, cache[i].pre) : cache[i].pre;
      }
    }
    const int y = labels[n];
    out.loss += scale * cross_entropy(h, y);
    std::vector<double> delta = softmax(h);
    delta[static_cast<std::size_t>(y)] -= 1.0;
    for (double& v : delta) v *= scale;
    // delta is the gradient with respect to the post-activation output of the current layer.
    for (std::size_t i = L; i-- > 0;) {
      const bool act_on = i + 1 < L || net.last_activation;
      const Layer& l = net.layers[i];
      if (is_conv(l)) {
        const auto& c = std::get<ConvLayer>(l);
        std::vector<double> dz(cache[i].pre.size(), 0.0);
        if (c.pooling == PoolKind::max) {
          for (std::size_t k = 0; k < delta.size(); ++k) dz[cache[i].pool_src[k]] += delta[k];
        } else {
          dz = delta;
        }
        if (act_on)
          for (std::size_t k = 0; k < dz.size(); ++k) dz[k] *= act_deriv(c.activation, cache[i].pre[k]);
        const std::size_t U = c.out_channels(), O = c.patch_count(), D = c.patch_dim();
        Matrix& g = out.grads[i];
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t j = 0; j < U; ++j) {
            const double v = dz[j * O + o];
            if (v == 0.0) continue;
            for (std::size_t k = 0; k < D; ++k) g(j, k) += v * cache[i].input[static_cast<std::size_t>(c.patches[o][k])];
          }
        if (i > 0) delta = conv_adjoint(c, dz);
      } else {
        const auto& d = std::get<DenseLayer>(l);
        std::vector<double> dz = delta;
        if (act_on)
          for (std::size_t k = 0; k < dz.size(); ++k) dz[k] *= act_deriv(d.activation, cache[i].pre[k]);
        Matrix& g = out.grads[i];
        for (std::size_t r = 0; r < dz.size(); ++r) {
          if (dz[r] == 0.0) continue;
          for (std::size_t c = 0; c < cache[i].input.size(); ++c) g(r, c) += dz[r] * cache[i].input[c];
        }
        if (i > 0) delta = matvec_t(d.weight, dz);
      }
    }
  }
  out.loss += weight_decay * penalty(net);
  for (std::size_t i = 0; i < L; ++i) out.grads[i] += (2.0 * weight_decay) * layer_weight(net.layers[i]);
  return out;
}

double total_loss(const NetworkSpec& net, const Matrix& inputs, const std::vector<int>& labels, double weight_decay) {
  double loss = 0.0;
  for (std::size_t n = 0; n < inputs.rows(); ++n) loss += cross_entropy(forward(net, inputs.row(n)), labels[n]);
  return loss / static_cast<double>(inputs.rows()) + weight_decay * penalty(net);
}

double accuracy(const NetworkSpec& net, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t right = 0;
  for (std::size_t n = 0; n < data.size(); ++n)
    right += static_cast<int>(argmax_smallest(forward(net, data.inputs.row(n)))) == data.labels[n];
  return static_cast<double>(right) / static_cast<double>(data.size());
}

namespace {

// Warm-started power iteration; vectors persist across steps because weights move slowly.
class SpectralProjector {
 public:
  explicit SpectralProjector(const NetworkSpec& net) {
    for (const Layer& l : net.layers) {
      const std::size_t n = layer_weight(l).cols();
      v_.emplace_back(n, 1.0 / std::sqrt(static_cast<double>(n)));
    }
  }

  void project(NetworkSpec& net, double cap) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      Matrix& a = layer_weight(net.layers[i]);
      std::vector<double>& v = v_[i];
      double sigma = norm2(matvec(a, v));
      for (int it = 0; it < 200; ++it) {
        std::vector<double> w = matvec_t(a, matvec(a, v));
        const double nw = norm2(w);
        if (nw == 0.0) break;
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = w[k] / nw;
        const double next = norm2(matvec(a, v));
        const bool done = std::abs(next - sigma) <= 1e-10 * next;
        sigma = next;
        if (done) break;
      }
      if (sigma > cap) a *= cap / sigma;
    }
  }

 private:
  std::vector<std::vector<double>> v_;
};

void exact_cap(NetworkSpec& net, double cap) {
  for (Layer& l : net.layers) {
    Matrix& a = layer_weight(l);
    const double s = singular_values(a)[0];
    if (s > cap) a *= cap / s;
  }
}

}  // namespace

TrainResult sgd_train(NetworkSpec net, const Dataset& data, const TrainConfig& cfg) {
  net.validate();
  if (data.size() == 0) throw std::invalid_argument("sgd_train: empty dataset");
  if (cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) || cfg.weight_decay < 0.0 || cfg.epochs < 0)
    throw std::invalid_argument("sgd_train: invalid hyperparameters");
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<SpectralProjector> projector;
  if (cfg.spectral_cap) {
    projector.emplace(net);
    exact_cap(net, *cfg.spectral_cap);
  }
  TrainResult res;
  res.epoch_loss.push_back(total_loss(net, data.inputs, data.labels, cfg.weight_decay));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
      LossGrad lg = loss_and_gradient(net, data.inputs, data.labels, batch, cfg.weight_decay);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "sgd_train: loss became non-finite in epoch " << epoch << " (last full objective "
            << res.epoch_loss.back() << ", learning rate " << cfg.learning_rate << ")";
        throw TrainingDiverged(msg.str());
      }
      for (std::size_t i = 0; i < net.depth(); ++i) layer_weight(net.layers[i]) -= cfg.learning_rate * lg.grads[i];
      if (projector) projector->project(net, *cfg.spectral_cap);
    }
    const double full = total_loss(net, data.inputs, data.labels, cfg.weight_decay);
    if (!std::isfinite(full)) {
      std::ostringstream msg;
      msg << "sgd_train: objective became non-finite after epoch " << epoch;
      throw TrainingDiverged(msg.str());
    }
    res.epoch_loss.push_back(full);
  }
  if (cfg.spectral_cap) exact_cap(net, *cfg.spectral_cap);
  res.net = std::move(net);
  return res;
}

SweepReport rank_sweep(const TrainConfig& base, const std::vector<std::size_t>& widths, const std::vector<double>& decays,
                       const Dataset& train, const Dataset& test, double accuracy_floor, double delta) {
  SweepReport rep;
  rep.rows.resize(widths.size() * decays.size());
  parallel_for(rep.rows.size(), [&](std::size_t cell) {
    const std::size_t wi = cell / decays.size(), di = cell % decays.size();
    TrainConfig cfg = base;
    for (auto& h : cfg.arch.hidden) h = widths[wi];
    cfg.weight_decay = decays[di];
    NetworkSpec init = build_network(cfg.arch, cfg.seed);
    TrainResult tr = sgd_train(init, train, cfg);
    SweepRow row;
    row.width = widths[wi];
    row.weight_decay = decays[di];
    row.train_accuracy = accuracy(tr.net, train);
    row.test_accuracy = accuracy(tr.net, test);
    for (const Layer& l : tr.net.layers) {
      const auto s = singular_values(layer_weight(l));
      row.effective_ranks.push_back(rank_from_singulars(s, 1e-3));
      row.ranks.push_back(rank_from_singulars(s));
    }
    const ActivationStats stats = activation_stats(tr.net, train.inputs, train.labels);
    const auto gamma = select_margin(stats, 0.1);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.margin = gamma.value_or(nan);
    row.bound_dnn = row.bound_dnn_aug = row.bound_rank = row.graf = row.long_sedghi = nan;
    if (gamma) {
      BoundConfig bc;
      bc.delta = delta;
      bc.sample_count = train.size();
      bc.lip = 2.0 / *gamma;
      const AnalysisInputs in = prepare_inputs(tr.net, stats);
      if (in.all_dense) {
        const PGridResult opt = optimize_p(BoundKind::dnn, bc, in);
        row.bound_dnn = opt.value;
        row.chosen_p = opt.p_vec;
        row.bound_dnn_aug = optimize_p(BoundKind::dnn_aug, bc, in).value;
        row.bound_rank = bound_p0(BoundKind::dnn, bc, in).value;
      } else {
        const PGridResult opt = optimize_p(BoundKind::cnn, bc, in);
        row.bound_dnn = opt.value;
        row.chosen_p = opt.p_vec;
        row.bound_dnn_aug = optimize_p(BoundKind::cnn_aug, bc, in).value;
        row.bound_rank = bound_p0(BoundKind::cnn, bc, in).value;
      }
      row.graf = baseline("graf", in, bc).value;
      row.long_sedghi = baseline("long_sedghi", in, bc).value;
    }
    row.net = std::move(tr.net);
    rep.rows[cell] = std::move(row);
  });
  for (std::size_t wi = 0; wi < widths.size(); ++wi) {
    SweepRow* pick = nullptr;
    for (std::size_t di = 0; di < decays.size(); ++di) {
      SweepRow& r = rep.rows[wi * decays.size() + di];
      if (r.test_accuracy >= accuracy_floor && (!pick || r.weight_decay > pick->weight_decay)) pick = &r;
    }
    if (pick)
      pick->selected = true;
    else
      rep.widths_without_selection.push_back(widths[wi]);
  }
  return rep;
}

}  // namespace scert

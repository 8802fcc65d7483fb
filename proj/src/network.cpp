#include "snnkit/network.hpp"

#include <Eigen/Core>

#include <cmath>
#include <utility>

#include "snnkit/rng.hpp"

namespace snnkit {
namespace {

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr std::uint64_t kReadoutStream = 1000;

template <class S>
FastCfg fast_cfg(const NetworkConfig& cfg, bool first_layer) {
  FastCfg fc;
  fc.surrogate.slope = cfg.surrogate_slope;
  fc.backend = cfg.backend;
  fc.trainable_beta = cfg.trainable_beta;
  fc.retain_aux = false;
  fc.validate_input = first_layer;
  return fc;
}

// Readout membrane: leak + integrate, no threshold, stepped in time.
template <class S>
void seq_readout_forward(const Tensor<S>& in, const LayerParams<S>& p, Tensor<S>& current,
                         Tensor<S>& v) {
  const index_t b = in.dim(0), n_in = in.dim(1), t_steps = in.dim(2);
  const index_t c = p.n_out();
  if (!current.same_shape(v) || current.shape() != std::vector<index_t>{b, c, t_steps}) {
    current = Tensor<S>({b, c, t_steps});
    v = Tensor<S>({b, c, t_steps});
  }
  Tensor<S> in_t({b, n_in}), cur_t({b, c}), state({b, c});
  CMatMap<S> wm(p.w.data(), c, n_in);
  for (index_t t = 0; t < t_steps; ++t) {
    S* gather = in_t.data();
    const S* src = in.data();
    for (index_t bi = 0; bi < b; ++bi)
      for (index_t j = 0; j < n_in; ++j)
        gather[bi * n_in + j] = src[(bi * n_in + j) * t_steps + t];
    CMatMap<S> x(in_t.data(), b, n_in);
    MatMap<S> cm(cur_t.data(), b, c);
    cm.noalias() = x * wm.transpose();
    cm.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(p.bias.data(), c);
    for (index_t bi = 0; bi < b; ++bi) {
      for (index_t ci = 0; ci < c; ++ci) {
        const index_t flat = bi * c + ci;
        const S bn = p.beta(ci);
        const S vv = bn * state.data()[flat] + (S(1) - bn) * cur_t.data()[flat];
        state.data()[flat] = vv;
        current.data()[flat * t_steps + t] = cur_t.data()[flat];
        v.data()[flat * t_steps + t] = vv;
      }
    }
  }
}

// First index of the maximum along time for every (b, c) row.
template <class S>
std::vector<index_t> argmax_time(const Tensor<S>& v) {
  const index_t rows = v.dim(0) * v.dim(1), t_steps = v.dim(2);
  std::vector<index_t> arg(static_cast<std::size_t>(rows), 0);
  for (index_t r = 0; r < rows; ++r) {
    const S* row = v.data() + r * t_steps;
    index_t best = 0;
    for (index_t t = 1; t < t_steps; ++t)
      if (row[t] > row[best]) best = t;
    arg[static_cast<std::size_t>(r)] = best;
  }
  return arg;
}

}  // namespace

std::string to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::FastSingle: return "fast-single";
    case ModelVariant::SeqSingle: return "seq-single";
    case ModelVariant::SeqMulti: return "seq-multi";
  }
  return "fast-single";
}

ModelVariant model_variant_from_string(const std::string& s) {
  if (s == "fast-single") return ModelVariant::FastSingle;
  if (s == "seq-single") return ModelVariant::SeqSingle;
  if (s == "seq-multi") return ModelVariant::SeqMulti;
  throw ParamError("unknown model variant '" + s + "'");
}

std::string to_string(ReadoutMode m) { return m == ReadoutMode::Sum ? "sum" : "max"; }

ReadoutMode readout_mode_from_string(const std::string& s) {
  if (s == "sum") return ReadoutMode::Sum;
  if (s == "max") return ReadoutMode::Max;
  throw ParamError("unknown readout mode '" + s + "'");
}

void NetworkConfig::validate() const {
  if (sizes.size() < 2) throw ParamError("network: sizes must list input and class counts");
  for (index_t d : sizes)
    if (d < 1) throw ParamError("network: all layer sizes must be positive");
  if (T < 1) throw ParamError("network: T must be positive");
  if (!(dt > 0)) throw ParamError("network: dt must be positive");
  if (!(surrogate_slope > 0)) throw ParamError("network: surrogate slope must be positive");
  if (!(init_gain > 0)) throw ParamError("network: init gain must be positive");
  if (!(tau_hidden > 0) || !(tau_readout > 0))
    throw ParamError("network: time constants must be positive");
}

template <class S>
Network<S> init_network(const NetworkConfig& cfg) {
  cfg.validate();
  Network<S> net;
  net.cfg = cfg;
  Rng root(cfg.seed);

  const index_t n_hidden = cfg.n_hidden_layers();
  net.hidden.clear();
  for (index_t l = 0; l < n_hidden; ++l) {
    const index_t n_in = cfg.sizes[static_cast<std::size_t>(l)];
    const index_t n_out = cfg.sizes[static_cast<std::size_t>(l) + 1];
    LayerParams<S> p(n_out, n_in);
    if (!cfg.zero_hidden_init) {
      Rng r = root.child(static_cast<std::uint64_t>(l));
      const double bound = std::sqrt(cfg.init_gain / static_cast<double>(n_in));
      for (index_t i = 0; i < p.w.numel(); ++i)
        p.w(i) = static_cast<S>(r.uniform(-bound, bound));
    }
    p.beta.fill(static_cast<S>(beta_from_tau(cfg.tau_hidden, cfg.dt)));
    net.hidden.push_back(std::move(p));
  }

  const index_t ro_in = cfg.sizes[cfg.sizes.size() - 2];
  LayerParams<S> ro(cfg.n_classes(), ro_in);
  {
    Rng r = root.child(kReadoutStream);
    const double bound = std::sqrt(cfg.init_gain / static_cast<double>(ro_in));
    for (index_t i = 0; i < ro.w.numel(); ++i)
      ro.w(i) = static_cast<S>(r.uniform(-bound, bound));
  }
  ro.beta.fill(static_cast<S>(beta_from_tau(cfg.tau_readout, cfg.dt)));
  net.readout = std::move(ro);
  return net;
}

template <class S>
Tensor<S> readout_forward(const Tensor<S>& potentials, ReadoutMode mode) {
  require_ndim(potentials, 3, "readout input");
  const index_t b = potentials.dim(0), c = potentials.dim(1), t_steps = potentials.dim(2);
  if (t_steps < 1) throw ShapeError("readout: empty time axis");
  Tensor<S> out({b, c});
  for (index_t r = 0; r < b * c; ++r) {
    const S* row = potentials.data() + r * t_steps;
    if (mode == ReadoutMode::Sum) {
      S acc = S(0);
      for (index_t t = 0; t < t_steps; ++t) acc += row[t];
      out(r) = acc;
    } else {
      S best = row[0];
      for (index_t t = 1; t < t_steps; ++t)
        if (row[t] > best) best = row[t];
      out(r) = best;
    }
  }
  return out;
}

template <class S>
void network_forward(const Network<S>& net, const Tensor<S>& input, NetTrace<S>& trace) {
  const NetworkConfig& cfg = net.cfg;
  require_ndim(input, 3, "network input");
  require_shape(input, {input.dim(0), cfg.n_in(), cfg.T}, "network input");
  if (static_cast<index_t>(net.hidden.size()) != cfg.n_hidden_layers())
    throw StateError("network_forward: layer stack does not match the config");

  trace.valid = false;
  const Tensor<S>* last = &input;
  if (cfg.variant == ModelVariant::FastSingle) {
    trace.seq.layers.clear();
    trace.fast_layers.resize(net.hidden.size());
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
      fast_layer_forward(*last, net.hidden[l], fast_cfg<S>(cfg, l == 0), trace.fast_layers[l]);
      last = &trace.fast_layers[l].out_spikes;
    }
    trace.readout_current = affine_forward(*last, net.readout.w, net.readout.bias);
    trace.readout_v = no_reset_potentials(trace.readout_current, net.readout.beta,
                                          Tensor<S>({cfg.n_classes()}), cfg.backend);
  } else {
    trace.fast_layers.clear();
    const SpikeMode mode =
        cfg.variant == ModelVariant::SeqSingle ? SpikeMode::Single : SpikeMode::Multi;
    if (!net.hidden.empty()) {
      seq_forward(net.hidden, input, mode, trace.seq);
      last = &trace.seq.layers.back().out_spikes;
    } else {
      require_binary(input, "network input");
      trace.seq.layers.clear();
      trace.seq.mode = mode;
    }
    seq_readout_forward(*last, net.readout, trace.readout_current, trace.readout_v);
  }
  trace.scores = readout_forward(trace.readout_v, cfg.readout);
  trace.valid = true;
}

template <class S>
void network_backward(const Network<S>& net, const Tensor<S>& input, const NetTrace<S>& trace,
                      const Tensor<S>& grad_scores, NetGrads<S>& grads) {
  const NetworkConfig& cfg = net.cfg;
  if (!trace.valid) throw StateError("network_backward: no forward trace");
  const index_t b = input.dim(0), c = cfg.n_classes(), t_steps = cfg.T;
  require_shape(grad_scores, {b, c}, "network grad_scores");

  grads.hidden.resize(net.hidden.size());
  const Tensor<S>* last =
      net.hidden.empty()
          ? &input
          : (cfg.variant == ModelVariant::FastSingle ? &trace.fast_layers.back().out_spikes
                                                     : &trace.seq.layers.back().out_spikes);

  // Readout: scores -> time-resolved potential grad -> current grad + beta grad.
  Tensor<S> g_cur({b, c, t_steps});
  if (grads.readout.beta.shape() != std::vector<index_t>{c}) grads.readout.beta = Tensor<S>({c});
  grads.readout.beta.fill(S(0));
  std::vector<index_t> arg;
  if (cfg.readout == ReadoutMode::Max) arg = argmax_time(trace.readout_v);

  if (cfg.variant == ModelVariant::FastSingle) {
    Tensor<S> g_v({b, c, t_steps});
    for (index_t r = 0; r < b * c; ++r) {
      const S gs = grad_scores(r);
      S* row = g_v.data() + r * t_steps;
      if (cfg.readout == ReadoutMode::Sum) {
        for (index_t t = 0; t < t_steps; ++t) row[t] = gs;
      } else {
        row[arg[static_cast<std::size_t>(r)]] = gs;
      }
    }
    no_reset_backward(g_v, trace.readout_current, net.readout.beta, Tensor<S>({c}), g_cur,
                      grads.readout.beta, cfg.backend);
  } else {
    Tensor<S> gium({b, c});
    for (index_t t = t_steps; t-- > 0;) {
      for (index_t r = 0; r < b * c; ++r) {
        const index_t ci = r % c;
        const S bn = net.readout.beta(ci);
        S gd = S(0);
        if (cfg.readout == ReadoutMode::Sum)
          gd = grad_scores(r);
        else if (arg[static_cast<std::size_t>(r)] == t)
          gd = grad_scores(r);
        const S g_new = gd + bn * gium(r);
        if (cfg.trainable_beta) {
          const S v_prev = t > 0 ? trace.readout_v.data()[r * t_steps + t - 1] : S(0);
          grads.readout.beta(ci) +=
              g_new * (v_prev - trace.readout_current.data()[r * t_steps + t]);
        }
        g_cur.data()[r * t_steps + t] = (S(1) - bn) * g_new;
        gium(r) = g_new;
      }
    }
  }
  if (!cfg.trainable_beta) grads.readout.beta.fill(S(0));

  Tensor<S> g_last;
  affine_backward(g_cur, *last, net.readout.w, net.hidden.empty() ? nullptr : &g_last,
                  grads.readout.w, grads.readout.bias);
  if (net.hidden.empty()) return;

  if (cfg.variant == ModelVariant::FastSingle) {
    Tensor<S> g = std::move(g_last);
    for (std::size_t l = net.hidden.size(); l-- > 0;) {
      const Tensor<S>& in = l == 0 ? input : trace.fast_layers[l - 1].out_spikes;
      Tensor<S> g_below;
      fast_layer_backward(trace.fast_layers[l], in, net.hidden[l], g, fast_cfg<S>(cfg, l == 0),
                          grads.hidden[l], l > 0 ? &g_below : nullptr);
      if (l > 0) g = std::move(g_below);
    }
  } else {
    seq_backward(trace.seq, net.hidden, input, g_last, cfg.surrogate_slope, grads.hidden,
                 static_cast<Tensor<S>*>(nullptr), cfg.trainable_beta);
  }
}

template <class S>
std::pair<double, Tensor<S>> softmax_xent(const Tensor<S>& scores,
                                          const std::vector<int>& labels) {
  require_ndim(scores, 2, "softmax scores");
  const index_t b = scores.dim(0), c = scores.dim(1);
  if (static_cast<index_t>(labels.size()) != b)
    throw ShapeError("softmax: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(b) + " score rows");
  if (b == 0) throw ShapeError("softmax: empty batch");

  Tensor<S> grad({b, c});
  double loss = 0.0;
  std::vector<double> p(static_cast<std::size_t>(c));
  for (index_t bi = 0; bi < b; ++bi) {
    const int y = labels[static_cast<std::size_t>(bi)];
    if (y < 0 || y >= c)
      throw LabelError("label " + std::to_string(y) + " outside [0," + std::to_string(c) +
                       ") at sample " + std::to_string(bi));
    double mx = static_cast<double>(scores(bi, 0));
    for (index_t ci = 1; ci < c; ++ci)
      mx = std::max(mx, static_cast<double>(scores(bi, ci)));
    double denom = 0.0;
    for (index_t ci = 0; ci < c; ++ci) {
      p[static_cast<std::size_t>(ci)] = std::exp(static_cast<double>(scores(bi, ci)) - mx);
      denom += p[static_cast<std::size_t>(ci)];
    }
    // lse - s_y stays finite even when the true-class probability underflows
    loss += std::log(denom) - (static_cast<double>(scores(bi, y)) - mx);
    for (index_t ci = 0; ci < c; ++ci) {
      const double prob = p[static_cast<std::size_t>(ci)] / denom;
      grad(bi, ci) = static_cast<S>((prob - (ci == y ? 1.0 : 0.0)) / static_cast<double>(b));
    }
  }
  return {loss / static_cast<double>(b), std::move(grad)};
}

template <class S>
double count_hidden_spikes(const NetTrace<S>& trace) {
  double total = 0.0;
  if (!trace.fast_layers.empty()) {
    for (const auto& lt : trace.fast_layers)
      for (index_t i = 0; i < lt.out_spikes.numel(); ++i)
        total += static_cast<double>(lt.out_spikes(i));
  } else {
    for (const auto& lt : trace.seq.layers)
      for (index_t i = 0; i < lt.out_spikes.numel(); ++i)
        total += static_cast<double>(lt.out_spikes(i));
  }
  return total;
}

template Network<float> init_network<float>(const NetworkConfig&);
template Network<double> init_network<double>(const NetworkConfig&);
template Tensor<float> readout_forward<float>(const Tensor<float>&, ReadoutMode);
template Tensor<double> readout_forward<double>(const Tensor<double>&, ReadoutMode);
template void network_forward<float>(const Network<float>&, const Tensor<float>&,
                                     NetTrace<float>&);
template void network_forward<double>(const Network<double>&, const Tensor<double>&,
                                      NetTrace<double>&);
template void network_backward<float>(const Network<float>&, const Tensor<float>&,
                                      const NetTrace<float>&, const Tensor<float>&,
                                      NetGrads<float>&);
template void network_backward<double>(const Network<double>&, const Tensor<double>&,
                                       const NetTrace<double>&, const Tensor<double>&,
                                       NetGrads<double>&);
template std::pair<double, Tensor<float>> softmax_xent<float>(const Tensor<float>&,
                                                              const std::vector<int>&);
template std::pair<double, Tensor<double>> softmax_xent<double>(const Tensor<double>&,
                                                                const std::vector<int>&);
template double count_hidden_spikes<float>(const NetTrace<float>&);
template double count_hidden_spikes<double>(const NetTrace<double>&);

}  // namespace snnkit

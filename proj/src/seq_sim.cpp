#include "snnkit/seq_sim.hpp"

#include <Eigen/Core>

#include <string>

namespace snnkit {
namespace {

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// cur = in_t * W^T + bias, then one leak/integrate/reset/fire update on the
// contiguous B x N state buffers.
template <class S>
void step_kernel(const LayerParams<S>& p, const Tensor<S>& in_t, index_t b, SpikeMode mode,
                 S* v, S* d, S* last, S* out, S* cur) {
  const index_t n_out = p.n_out(), n_in = p.n_in();
  CMatMap<S> x(in_t.data(), b, n_in);
  CMatMap<S> wm(p.w.data(), n_out, n_in);
  MatMap<S> c(cur, b, n_out);
  c.noalias() = x * wm.transpose();
  c.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(p.bias.data(), n_out);

  const S* beta = p.beta.data();
  for (index_t bi = 0; bi < b; ++bi) {
    const index_t row = bi * n_out;
    for (index_t ni = 0; ni < n_out; ++ni) {
      const index_t i = row + ni;
      const S bn = beta[ni];
      const S vv = bn * v[i] + (S(1) - bn) * cur[i] - last[i];
      const S raw = spike_fn(vv);
      const S emitted = mode == SpikeMode::Single ? (S(1) - d[i]) * raw : raw;
      v[i] = vv;
      last[i] = emitted;
      out[i] = emitted;
      if (emitted > d[i]) d[i] = emitted;
    }
  }
}

}  // namespace

template <class S>
void seq_step(SeqLayerState<S>& state, const LayerParams<S>& params, const Tensor<S>& in_t,
              SpikeMode mode, Tensor<S>& out_t, Tensor<S>* current_out) {
  require_valid_params(params, "seq_step");
  require_ndim(in_t, 2, "seq_step input");
  const index_t b = in_t.dim(0);
  if (in_t.dim(1) != params.n_in())
    throw ShapeError("seq_step: input " + in_t.shape_str() + " does not match weight " +
                     params.w.shape_str());
  require_shape(state.v, {b, params.n_out()}, "seq_step state.v");
  require_same_shape(state.d, state.v, "seq_step state.d");
  require_same_shape(state.last_spike, state.v, "seq_step state.last_spike");

  if (!out_t.same_shape(state.v)) out_t = Tensor<S>({b, params.n_out()});
  Tensor<S> local;
  Tensor<S>& cur = current_out ? *current_out : local;
  if (!cur.same_shape(state.v)) cur = Tensor<S>({b, params.n_out()});

  step_kernel(params, in_t, b, mode, state.v.data(), state.d.data(), state.last_spike.data(),
              out_t.data(), cur.data());
}

template <class S>
void seq_forward(const std::vector<LayerParams<S>>& layers, const Tensor<S>& input,
                 SpikeMode mode, SeqTrace<S>& trace) {
  if (layers.empty()) throw ParamError("seq_forward: no layers");
  require_ndim(input, 3, "seq_forward input");
  require_binary(input, "seq_forward input");
  const index_t b = input.dim(0), t_steps = input.dim(2);
  index_t n_prev = input.dim(1);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require_valid_params(layers[l], "seq_forward layer " + std::to_string(l));
    if (layers[l].n_in() != n_prev)
      throw ShapeError("seq_forward: layer " + std::to_string(l) + " expects " +
                       std::to_string(layers[l].n_in()) + " inputs, got " +
                       std::to_string(n_prev));
    n_prev = layers[l].n_out();
  }

  trace.mode = mode;
  trace.layers.assign(layers.size(), SeqLayerTrace<S>{});
  const Tensor<S>* prev = &input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const index_t n = layers[l].n_out(), n_in = layers[l].n_in();
    SeqLayerTrace<S>& lt = trace.layers[l];
    lt.v = Tensor<S>({b, n, t_steps});
    lt.current = Tensor<S>({b, n, t_steps});
    lt.out_spikes = Tensor<S>({b, n, t_steps});
    lt.first_spike.assign(static_cast<std::size_t>(b * n), static_cast<std::int32_t>(t_steps));

    SeqLayerState<S> state(b, n);
    Tensor<S> in_t({b, n_in}), out_t({b, n}), cur_t({b, n});
    const S* src = prev->data();
    for (index_t t = 0; t < t_steps; ++t) {
      S* gather = in_t.data();
      for (index_t bi = 0; bi < b; ++bi)
        for (index_t j = 0; j < n_in; ++j)
          gather[bi * n_in + j] = src[(bi * n_in + j) * t_steps + t];
      seq_step(state, layers[l], in_t, mode, out_t, &cur_t);
      for (index_t bi = 0; bi < b; ++bi) {
        for (index_t ni = 0; ni < n; ++ni) {
          const index_t flat = bi * n + ni;
          const index_t at = flat * t_steps + t;
          lt.v.data()[at] = state.v.data()[flat];
          lt.current.data()[at] = cur_t.data()[flat];
          const S s = out_t.data()[flat];
          lt.out_spikes.data()[at] = s;
          if (s == S(1) && lt.first_spike[static_cast<std::size_t>(flat)] ==
                               static_cast<std::int32_t>(t_steps))
            lt.first_spike[static_cast<std::size_t>(flat)] = static_cast<std::int32_t>(t);
        }
      }
    }
    prev = &lt.out_spikes;
  }
}

template <class S>
void seq_backward(const SeqTrace<S>& trace, const std::vector<LayerParams<S>>& layers,
                  const Tensor<S>& input, const Tensor<S>& grad_out, double slope,
                  std::vector<LayerGrads<S>>& grads, Tensor<S>* grad_input,
                  bool trainable_beta) {
  if (trace.layers.size() != layers.size())
    throw StateError("seq_backward: trace does not match the layer stack");
  if (layers.empty()) throw ParamError("seq_backward: no layers");
  const index_t b = input.dim(0), t_steps = input.dim(2);
  const index_t n_last = layers.back().n_out();
  require_shape(grad_out, {b, n_last, t_steps}, "seq_backward grad_out");

  grads.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!grads[l].w.same_shape(layers[l].w)) grads[l] = LayerGrads<S>(layers[l].n_out(),
                                                                      layers[l].n_in());
    grads[l].zero();
  }

  const S slope_s = static_cast<S>(slope);
  Tensor<S> g_up = grad_out;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const LayerParams<S>& p = layers[li];
    const SeqLayerTrace<S>& lt = trace.layers[li];
    const index_t n = p.n_out(), n_in = p.n_in();
    const Tensor<S>& in = li == 0 ? input : trace.layers[li - 1].out_spikes;
    require_shape(lt.v, {b, n, t_steps}, "seq_backward trace.v");

    const bool need_lower = li > 0 || grad_input != nullptr;
    Tensor<S> g_lower;
    if (need_lower) g_lower = Tensor<S>({b, n_in, t_steps});

    Tensor<S> gv({b, n}), gcur_t({b, n}), in_t({b, n_in}), glow_t;
    if (need_lower) glow_t = Tensor<S>({b, n_in});
    const S* beta = p.beta.data();
    S* gbias = grads[li].bias.data();
    S* gbeta = grads[li].beta.data();
    MatMap<S> gw(grads[li].w.data(), n, n_in);
    CMatMap<S> wm(p.w.data(), n, n_in);

    for (index_t t = t_steps; t-- > 0;) {
      for (index_t bi = 0; bi < b; ++bi) {
        for (index_t ni = 0; ni < n; ++ni) {
          const index_t flat = bi * n + ni;
          const index_t at = flat * t_steps + t;
          S ge = g_up.data()[at];
          if (trace.mode == SpikeMode::Single &&
              t > static_cast<index_t>(lt.first_spike[static_cast<std::size_t>(flat)]))
            ge = S(0);
          const S vt = lt.v.data()[at];
          const S g_new = ge * surrogate_grad(vt, slope_s) + beta[ni] * gv.data()[flat];
          if (trainable_beta) {
            const S v_prev = t > 0 ? lt.v.data()[at - 1] : S(0);
            gbeta[ni] += g_new * (v_prev - lt.current.data()[at]);
          }
          const S gc = (S(1) - beta[ni]) * g_new;
          gcur_t.data()[flat] = gc;
          gbias[ni] += gc;
          gv.data()[flat] = g_new;
        }
      }
      const S* src = in.data();
      S* gather = in_t.data();
      for (index_t bi = 0; bi < b; ++bi)
        for (index_t j = 0; j < n_in; ++j)
          gather[bi * n_in + j] = src[(bi * n_in + j) * t_steps + t];
      CMatMap<S> gc_m(gcur_t.data(), b, n);
      CMatMap<S> in_m(in_t.data(), b, n_in);
      gw.noalias() += gc_m.transpose() * in_m;
      if (need_lower) {
        MatMap<S> gl(glow_t.data(), b, n_in);
        gl.noalias() = gc_m * wm;
        S* dst = g_lower.data();
        const S* gls = glow_t.data();
        for (index_t bi = 0; bi < b; ++bi)
          for (index_t j = 0; j < n_in; ++j)
            dst[(bi * n_in + j) * t_steps + t] = gls[bi * n_in + j];
      }
    }

    if (li == 0) {
      if (grad_input) *grad_input = std::move(g_lower);
    } else {
      g_up = std::move(g_lower);
    }
  }
}

template void seq_step<float>(SeqLayerState<float>&, const LayerParams<float>&,
                              const Tensor<float>&, SpikeMode, Tensor<float>&, Tensor<float>*);
template void seq_step<double>(SeqLayerState<double>&, const LayerParams<double>&,
                               const Tensor<double>&, SpikeMode, Tensor<double>&,
                               Tensor<double>*);
template void seq_forward<float>(const std::vector<LayerParams<float>>&, const Tensor<float>&,
                                 SpikeMode, SeqTrace<float>&);
template void seq_forward<double>(const std::vector<LayerParams<double>>&, const Tensor<double>&,
                                  SpikeMode, SeqTrace<double>&);
template void seq_backward<float>(const SeqTrace<float>&, const std::vector<LayerParams<float>>&,
                                  const Tensor<float>&, const Tensor<float>&, double,
                                  std::vector<LayerGrads<float>>&, Tensor<float>*, bool);
template void seq_backward<double>(const SeqTrace<double>&,
                                   const std::vector<LayerParams<double>>&, const Tensor<double>&,
                                   const Tensor<double>&, double,
                                   std::vector<LayerGrads<double>>&, Tensor<double>*, bool);

}  // namespace snnkit

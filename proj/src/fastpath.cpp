#include "snnkit/fastpath.hpp"

#include <cmath>
#include <vector>

#include "fft_conv.hpp"

namespace snnkit {
namespace {

bool use_direct(index_t t, ConvBackend backend) {
  if (backend == ConvBackend::Direct) return true;
  if (backend == ConvBackend::Fft) return false;
  return t < kDirectConvMaxT;
}

template <class S>
void require_unit_interval(const Tensor<S>& beta, const std::string& what) {
  for (index_t i = 0; i < beta.numel(); ++i)
    if (!(beta(i) >= S(0) && beta(i) <= S(1)))
      throw ParamError(what + ": beta[" + std::to_string(i) + "] = " +
                       std::to_string(static_cast<double>(beta(i))) + " outside [0,1]");
}

// K[n, j] = (1 - beta[n]) * beta[n]^j; the tail is left at zero once the
// repeated product underflows.
template <class S>
Tensor<S> decay_kernel(const Tensor<S>& beta, index_t t) {
  const index_t n = beta.dim(0);
  Tensor<S> k({n, t});
  for (index_t i = 0; i < n; ++i) {
    const S b = beta(i);
    S p = S(1) - b;
    for (index_t j = 0; j < t; ++j) {
      if (p == S(0)) break;
      k(i, j) = p;
      p *= b;
    }
  }
  return k;
}

// grad_beta[n] += sum_j grad_k[n, j] * d/dbeta[(1 - beta) * beta^j]
template <class S>
void kernel_beta_grad(const Tensor<S>& grad_k, const Tensor<S>& beta, Tensor<S>& grad_beta) {
  const index_t n = grad_k.dim(0), t = grad_k.dim(1);
  for (index_t i = 0; i < n; ++i) {
    const double b = static_cast<double>(beta(i));
    double acc = -static_cast<double>(grad_k(i, 0));
    double p = 1.0;  // beta^(j-1)
    for (index_t j = 1; j < t; ++j) {
      const double dk = (1.0 - b) * static_cast<double>(j) * p - p * b;
      acc += static_cast<double>(grad_k(i, j)) * dk;
      p *= b;
    }
    grad_beta(i) += static_cast<S>(acc);
  }
}

// Direct-path twin of detail::ramp_conv_rows_exact: the ramp convolution as
// explicit loops with double accumulators (integer-exact at any T).
template <class S>
void ramp_direct(const S* x, index_t rows, index_t t, bool apply_step, S* raw_out, S* latent_out,
                 S* first_out) {
  std::vector<double> s(static_cast<std::size_t>(t)), z(static_cast<std::size_t>(t));
  for (index_t r = 0; r < rows; ++r) {
    const S* src = x + r * t;
    for (index_t u = 0; u < t; ++u)
      s[static_cast<std::size_t>(u)] =
          apply_step ? (src[u] > S(1) ? 1.0 : 0.0) : static_cast<double>(src[u]);
    std::fill(z.begin(), z.end(), 0.0);
    for (index_t j = 0; j < t; ++j) {
      const double kj = static_cast<double>(j + 1);
      for (index_t u = j; u < t; ++u) z[static_cast<std::size_t>(u)] += kj * s[u - j];
    }
    for (index_t u = 0; u < t; ++u) {
      const std::size_t i = static_cast<std::size_t>(u);
      if (raw_out) raw_out[r * t + u] = static_cast<S>(s[i]);
      if (latent_out) latent_out[r * t + u] = static_cast<S>(z[i]);
      if (first_out) first_out[r * t + u] = (z[i] == 1.0) ? S(1) : S(0);
    }
  }
}

template <class S>
void ramp_pipeline(const S* x, index_t rows, index_t t, bool apply_step, S* raw_out,
                   S* latent_out, S* first_out, ConvBackend backend) {
  if (use_direct(t, backend))
    ramp_direct(x, rows, t, apply_step, raw_out, latent_out, first_out);
  else
    detail::ramp_conv_rows_exact(x, rows, t, apply_step, raw_out, latent_out, first_out);
}

}  // namespace

template <class S>
Tensor<S> no_reset_potentials(const Tensor<S>& current, const Tensor<S>& beta,
                              const Tensor<S>& v0, ConvBackend backend) {
  require_ndim(current, 3, "no_reset input");
  const index_t n = current.dim(1), t = current.dim(2);
  require_shape(beta, {n}, "no_reset beta");
  require_shape(v0, {n}, "no_reset v0");
  require_unit_interval(beta, "no_reset");

  Tensor<S> out = causal_conv(current, decay_kernel(beta, t), backend);
  for (index_t ni = 0; ni < n; ++ni) {
    if (v0(ni) == S(0)) continue;
    const index_t b = current.dim(0);
    for (index_t bi = 0; bi < b; ++bi) {
      S* row = out.data() + (bi * n + ni) * t;
      S p = beta(ni);
      for (index_t u = 0; u < t; ++u) {
        row[u] += p * v0(ni);
        p *= beta(ni);
      }
    }
  }
  return out;
}

template <class S>
void no_reset_backward(const Tensor<S>& grad_out, const Tensor<S>& current,
                       const Tensor<S>& beta, const Tensor<S>& v0, Tensor<S>& grad_current,
                       Tensor<S>& grad_beta, ConvBackend backend) {
  require_ndim(current, 3, "no_reset input");
  require_same_shape(grad_out, current, "no_reset grad_out");
  const index_t b = current.dim(0), n = current.dim(1), t = current.dim(2);
  require_shape(beta, {n}, "no_reset beta");
  require_shape(v0, {n}, "no_reset v0");

  Tensor<S> grad_k;
  causal_conv_backward(grad_out, current, decay_kernel(beta, t), grad_current, grad_k, backend);
  if (grad_beta.shape() != std::vector<index_t>{n}) grad_beta = Tensor<S>({n});
  grad_beta.fill(S(0));
  kernel_beta_grad(grad_k, beta, grad_beta);

  std::vector<double> wt(static_cast<std::size_t>(t));
  for (index_t ni = 0; ni < n; ++ni) {
    if (v0(ni) == S(0)) continue;
    const double bn = static_cast<double>(beta(ni));
    const double v0n = static_cast<double>(v0(ni));
    double p = 1.0;  // beta^t
    for (index_t u = 0; u < t; ++u) {
      wt[static_cast<std::size_t>(u)] = static_cast<double>(u + 1) * p * v0n;
      p *= bn;
    }
    double acc = 0.0;
    for (index_t bi = 0; bi < b; ++bi) {
      const S* row = grad_out.data() + (bi * n + ni) * t;
      for (index_t u = 0; u < t; ++u)
        acc += static_cast<double>(row[u]) * wt[static_cast<std::size_t>(u)];
    }
    grad_beta(ni) += static_cast<S>(acc);
  }
}

template <class S>
Tensor<S> phi(const Tensor<S>& raw_spikes, ConvBackend backend) {
  require_ndim(raw_spikes, 3, "phi input");
  require_binary(raw_spikes, "phi input");
  const index_t rows = raw_spikes.dim(0) * raw_spikes.dim(1), t = raw_spikes.dim(2);
  Tensor<S> out(raw_spikes.shape());
  if (!raw_spikes.empty())
    ramp_pipeline(raw_spikes.data(), rows, t, false, static_cast<S*>(nullptr), out.data(),
                  static_cast<S*>(nullptr), backend);
  return out;
}

template <class S>
Tensor<S> extract_first_spike(const Tensor<S>& latent) {
  require_ndim(latent, 3, "first-spike extraction input");
  Tensor<S> out(latent.shape());
  const S* z = latent.data();
  S* o = out.data();
  for (index_t i = 0; i < latent.numel(); ++i) o[i] = (z[i] == S(1)) ? S(1) : S(0);
  return out;
}

template <class S>
void fast_layer_forward(const Tensor<S>& input, const LayerParams<S>& params, const FastCfg& cfg,
                        FastLayerTrace<S>& trace) {
  require_valid_params(params, "fast_layer");
  require_ndim(input, 3, "fast_layer input");
  if (input.dim(1) != params.n_in())
    throw ShapeError("fast_layer: input " + input.shape_str() + " does not match weight " +
                     params.w.shape_str());
  if (cfg.validate_input) require_binary(input, "fast_layer input");

  const index_t b = input.dim(0), n = params.n_out(), t = input.dim(2);
  trace.current = affine_forward(input, params.w, params.bias);
  trace.no_reset_v = causal_conv(trace.current, decay_kernel(params.beta, t), cfg.backend);

  if (!trace.out_spikes.same_shape(trace.no_reset_v)) trace.out_spikes = Tensor<S>({b, n, t});
  S* raw = nullptr;
  S* latent = nullptr;
  if (cfg.retain_aux) {
    if (!trace.raw_spikes.same_shape(trace.no_reset_v)) trace.raw_spikes = Tensor<S>({b, n, t});
    if (!trace.latent.same_shape(trace.no_reset_v)) trace.latent = Tensor<S>({b, n, t});
    raw = trace.raw_spikes.data();
    latent = trace.latent.data();
  } else {
    trace.raw_spikes = Tensor<S>();
    trace.latent = Tensor<S>();
  }
  ramp_pipeline(trace.no_reset_v.data(), b * n, t, true, raw, latent, trace.out_spikes.data(),
                cfg.backend);
  trace.valid = true;
  trace.aux_retained = cfg.retain_aux;
}

template <class S>
void fast_layer_backward(const FastLayerTrace<S>& trace, const Tensor<S>& input,
                         const LayerParams<S>& params, const Tensor<S>& grad_out,
                         const FastCfg& cfg, LayerGrads<S>& grads, Tensor<S>* grad_input) {
  if (!trace.valid) throw StateError("fast_layer_backward: no forward trace");
  require_same_shape(grad_out, trace.no_reset_v, "fast_layer grad_out");
  const index_t b = grad_out.dim(0), n = grad_out.dim(1), t = grad_out.dim(2);
  const index_t rows = b * n;

  // Straight-through g, then the ramp correlation (phi is linear).
  Tensor<S> g_v({b, n, t});
  if (use_direct(t, cfg.backend)) {
    const S* g = grad_out.data();
    S* gs = g_v.data();
    for (index_t r = 0; r < rows; ++r) {
      const S* gr = g + r * t;
      S* o = gs + r * t;
      for (index_t u = 0; u < t; ++u) {
        S acc = S(0);
        for (index_t j = 0; j < t - u; ++j) acc += gr[u + j] * static_cast<S>(j + 1);
        o[u] = acc;
      }
    }
  } else {
    Tensor<S> ramp({1, t});
    for (index_t j = 0; j < t; ++j) ramp(0, j) = static_cast<S>(j + 1);
    detail::corr_rows_fft(grad_out.data(), rows, t, ramp.data(), 1, g_v.data());
  }

  // Surrogate derivative at the no-reset potentials.
  {
    const S slope = static_cast<S>(cfg.surrogate.slope);
    const S* v = trace.no_reset_v.data();
    S* g = g_v.data();
    for (index_t i = 0; i < rows * t; ++i) g[i] *= surrogate_grad(v[i], slope);
  }

  // Conv adjoint, beta gradient through the decay kernel when trainable.
  Tensor<S> k = decay_kernel(params.beta, t);
  Tensor<S> g_cur({b, n, t});
  if (grads.beta.shape() != std::vector<index_t>{n}) grads.beta = Tensor<S>({n});
  grads.beta.fill(S(0));
  if (use_direct(t, cfg.backend)) {
    Tensor<S> grad_k;
    causal_conv_backward(g_v, trace.current, k, g_cur, grad_k, cfg.backend);
    if (cfg.trainable_beta) kernel_beta_grad(grad_k, params.beta, grads.beta);
  } else {
    Tensor<S> grad_k;
    if (cfg.trainable_beta) grad_k = Tensor<S>({n, t});
    detail::conv_backward_fft(g_v.data(), trace.current.data(), rows, t, k.data(), n,
                              g_cur.data(), cfg.trainable_beta ? grad_k.data() : nullptr);
    if (cfg.trainable_beta) kernel_beta_grad(grad_k, params.beta, grads.beta);
  }

  affine_backward(g_cur, input, params.w, grad_input, grads.w, grads.bias);
}

template Tensor<float> no_reset_potentials<float>(const Tensor<float>&, const Tensor<float>&,
                                                  const Tensor<float>&, ConvBackend);
template Tensor<double> no_reset_potentials<double>(const Tensor<double>&, const Tensor<double>&,
                                                    const Tensor<double>&, ConvBackend);
template void no_reset_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                       const Tensor<float>&, const Tensor<float>&, Tensor<float>&,
                                       Tensor<float>&, ConvBackend);
template void no_reset_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                        const Tensor<double>&, const Tensor<double>&,
                                        Tensor<double>&, Tensor<double>&, ConvBackend);
template Tensor<float> phi<float>(const Tensor<float>&, ConvBackend);
template Tensor<double> phi<double>(const Tensor<double>&, ConvBackend);
template Tensor<float> extract_first_spike<float>(const Tensor<float>&);
template Tensor<double> extract_first_spike<double>(const Tensor<double>&);
template void fast_layer_forward<float>(const Tensor<float>&, const LayerParams<float>&,
                                        const FastCfg&, FastLayerTrace<float>&);
template void fast_layer_forward<double>(const Tensor<double>&, const LayerParams<double>&,
                                         const FastCfg&, FastLayerTrace<double>&);
template void fast_layer_backward<float>(const FastLayerTrace<float>&, const Tensor<float>&,
                                         const LayerParams<float>&, const Tensor<float>&,
                                         const FastCfg&, LayerGrads<float>&, Tensor<float>*);
template void fast_layer_backward<double>(const FastLayerTrace<double>&, const Tensor<double>&,
                                          const LayerParams<double>&, const Tensor<double>&,
                                          const FastCfg&, LayerGrads<double>&, Tensor<double>*);

}  // namespace snnkit

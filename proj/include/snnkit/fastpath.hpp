#pragma once

#include "snnkit/neuron.hpp"
#include "snnkit/ops.hpp"
#include "snnkit/params.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// No-reset membrane potentials by causal convolution with the per-neuron decay
// kernel (1-beta) * beta^j, plus the decayed initial-value term beta^(t+1) * v0.
template <class S>
Tensor<S> no_reset_potentials(const Tensor<S>& current, const Tensor<S>& beta,
                              const Tensor<S>& v0,
                              ConvBackend backend = ConvBackend::Auto);

// Adjoint of no_reset_potentials: gradient wrt the current and wrt beta
// (through both the decay kernel and the v0 term).
template <class S>
void no_reset_backward(const Tensor<S>& grad_out, const Tensor<S>& current,
                       const Tensor<S>& beta, const Tensor<S>& v0, Tensor<S>& grad_current,
                       Tensor<S>& grad_beta, ConvBackend backend = ConvBackend::Auto);

// Spike-ordering transform: z[t] = sum_{k<=t} s[k] * (t-k+1), the causal
// convolution with the ramp kernel [1,2,...,T]. Output is integer-valued; the
// value is 1 exactly at the first spike.
template <class S>
Tensor<S> phi(const Tensor<S>& raw_spikes, ConvBackend backend = ConvBackend::Auto);

// g: out[t] = 1 iff z[t] == 1 (exact comparison on integer-valued data).
// Backward contract: straight-through, gradients pass unchanged everywhere.
template <class S>
Tensor<S> extract_first_spike(const Tensor<S>& latent);

struct FastCfg {
  SurrogateCfg surrogate;
  ConvBackend backend = ConvBackend::Auto;
  bool trainable_beta = true;
  bool retain_aux = false;     // keep raw_spikes and latent in the trace
  bool validate_input = true;  // binary check on the layer input
};

template <class S>
struct FastLayerTrace {
  Tensor<S> current;      // B x N x T
  Tensor<S> no_reset_v;   // B x N x T
  Tensor<S> raw_spikes;   // retained only with retain_aux
  Tensor<S> latent;       // retained only with retain_aux
  Tensor<S> out_spikes;   // B x N x T
  bool valid = false;
  bool aux_retained = false;
};

// current -> no-reset potentials -> erroneous spikes -> phi -> first-spike
// extraction, with the trace retained for the backward pass.
template <class S>
void fast_layer_forward(const Tensor<S>& input, const LayerParams<S>& params,
                        const FastCfg& cfg, FastLayerTrace<S>& trace);

// Hand-composed adjoint: straight-through g, exact linear phi adjoint,
// surrogate at the no-reset potentials, conv adjoint (beta gradient through
// the kernel), affine adjoint. grad_input may be null.
template <class S>
void fast_layer_backward(const FastLayerTrace<S>& trace, const Tensor<S>& input,
                         const LayerParams<S>& params, const Tensor<S>& grad_out,
                         const FastCfg& cfg, LayerGrads<S>& grads,
                         Tensor<S>* grad_input = nullptr);

}  // namespace snnkit

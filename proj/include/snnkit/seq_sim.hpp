#pragma once

#include <vector>

#include "snnkit/neuron.hpp"
#include "snnkit/params.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

enum class SpikeMode { Single, Multi };

// Per-neuron running state of the time-stepped simulation (all B x N):
// membrane potential, spiked-before flag d, and the previous step's emitted
// spike (the reset source).
template <class S>
struct SeqLayerState {
  Tensor<S> v;
  Tensor<S> d;
  Tensor<S> last_spike;

  SeqLayerState() = default;
  SeqLayerState(index_t batch, index_t n)
      : v({batch, n}), d({batch, n}), last_spike({batch, n}) {}
};

// One simulated step: current from the input slice, leak + integrate - reset,
// strict-threshold spike, single-spike gate. current_out, when given, receives
// the step's input current (for traces).
template <class S>
void seq_step(SeqLayerState<S>& state, const LayerParams<S>& params,
              const Tensor<S>& in_t, SpikeMode mode, Tensor<S>& out_t,
              Tensor<S>* current_out = nullptr);

template <class S>
struct SeqLayerTrace {
  Tensor<S> v;           // B x N x T membrane potentials
  Tensor<S> current;     // B x N x T input currents
  Tensor<S> out_spikes;  // B x N x T emitted spikes
  std::vector<std::int32_t> first_spike;  // per (b,n), T = none; single mode gate
};

template <class S>
struct SeqTrace {
  std::vector<SeqLayerTrace<S>> layers;
  SpikeMode mode = SpikeMode::Single;
};

// Layer-by-layer, timestep-by-timestep simulation of the whole stack.
template <class S>
void seq_forward(const std::vector<LayerParams<S>>& layers, const Tensor<S>& input,
                 SpikeMode mode, SeqTrace<S>& trace);

// Surrogate-gradient BPTT over the saved traces. The reset term and the
// single-spike gate are treated as constants. grad_input may be null.
template <class S>
void seq_backward(const SeqTrace<S>& trace, const std::vector<LayerParams<S>>& layers,
                  const Tensor<S>& input, const Tensor<S>& grad_out, double slope,
                  std::vector<LayerGrads<S>>& grads, Tensor<S>* grad_input = nullptr,
                  bool trainable_beta = true);

}  // namespace snnkit

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnkit/fastpath.hpp"
#include "snnkit/params.hpp"
#include "snnkit/seq_sim.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

enum class ModelVariant { FastSingle, SeqSingle, SeqMulti };
enum class ReadoutMode { Sum, Max };

std::string to_string(ModelVariant v);
ModelVariant model_variant_from_string(const std::string& s);
std::string to_string(ReadoutMode m);
ReadoutMode readout_mode_from_string(const std::string& s);

struct NetworkConfig {
  std::vector<index_t> sizes;  // input, hidden..., classes
  ModelVariant variant = ModelVariant::FastSingle;
  index_t T = 100;
  double dt = 1.0;  // ms
  double surrogate_slope = 10.0;
  ReadoutMode readout = ReadoutMode::Sum;
  bool trainable_beta = true;
  std::uint64_t seed = 1;
  double init_gain = 1.0;        // weight bound sqrt(init_gain / fan_in)
  bool zero_hidden_init = false; // hidden weights and biases start at 0
  double tau_hidden = 10.0;      // ms
  double tau_readout = 20.0;     // ms
  ConvBackend backend = ConvBackend::Auto;

  index_t n_in() const { return sizes.front(); }
  index_t n_classes() const { return sizes.back(); }
  index_t n_hidden_layers() const { return static_cast<index_t>(sizes.size()) - 2; }
  void validate() const;
};

template <class S>
struct Network {
  NetworkConfig cfg;
  std::vector<LayerParams<S>> hidden;
  LayerParams<S> readout;

  // Stable parameter ordering used by the optimizer and checkpoints.
  template <class Fn>
  void for_each_param(Fn&& fn) {
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      fn("hidden" + std::to_string(l) + ".w", hidden[l].w);
      fn("hidden" + std::to_string(l) + ".bias", hidden[l].bias);
      fn("hidden" + std::to_string(l) + ".beta", hidden[l].beta);
    }
    fn("readout.w", readout.w);
    fn("readout.bias", readout.bias);
    fn("readout.beta", readout.beta);
  }
};

template <class S>
Network<S> init_network(const NetworkConfig& cfg);

template <class S>
struct NetGrads {
  std::vector<LayerGrads<S>> hidden;
  LayerGrads<S> readout;

  template <class Fn>
  void for_each(Fn&& fn) {
    for (auto& g : hidden) {
      fn(g.w);
      fn(g.bias);
      fn(g.beta);
    }
    fn(readout.w);
    fn(readout.bias);
    fn(readout.beta);
  }
};

// Collapse readout potentials over time into per-class scores.
template <class S>
Tensor<S> readout_forward(const Tensor<S>& potentials, ReadoutMode mode);

template <class S>
struct NetTrace {
  std::vector<FastLayerTrace<S>> fast_layers;
  SeqTrace<S> seq;
  Tensor<S> readout_current;  // B x C x T
  Tensor<S> readout_v;        // B x C x T
  Tensor<S> scores;           // B x C
  bool valid = false;
};

// Forward through the configured variant; scores land in trace.scores.
template <class S>
void network_forward(const Network<S>& net, const Tensor<S>& input, NetTrace<S>& trace);

template <class S>
void network_backward(const Network<S>& net, const Tensor<S>& input,
                      const NetTrace<S>& trace, const Tensor<S>& grad_scores,
                      NetGrads<S>& grads);

// Mean cross-entropy of softmax(scores) against integer class labels, and the
// gradient (p - y)/B wrt the scores.
template <class S>
std::pair<double, Tensor<S>> softmax_xent(const Tensor<S>& scores,
                                          const std::vector<int>& labels);

// Total hidden-layer spikes in the trace (for the sparsity metric).
template <class S>
double count_hidden_spikes(const NetTrace<S>& trace);

}  // namespace snnkit

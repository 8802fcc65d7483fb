#pragma once

#include "snnkit/neuron.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// One layer's trainables: weights (N_out x N_in), bias (N_out), per-neuron
// decay beta (N_out).
template <class S>
struct LayerParams {
  Tensor<S> w;
  Tensor<S> bias;
  Tensor<S> beta;

  LayerParams() = default;
  LayerParams(index_t n_out, index_t n_in)
      : w({n_out, n_in}), bias({n_out}), beta({n_out}) {}

  index_t n_out() const { return w.dim(0); }
  index_t n_in() const { return w.dim(1); }
};

template <class S>
struct LayerGrads {
  Tensor<S> w;
  Tensor<S> bias;
  Tensor<S> beta;

  LayerGrads() = default;
  LayerGrads(index_t n_out, index_t n_in)
      : w({n_out, n_in}), bias({n_out}), beta({n_out}) {}

  void zero() {
    w.fill(S(0));
    bias.fill(S(0));
    beta.fill(S(0));
  }
};

template <class S>
void require_valid_params(const LayerParams<S>& p, const std::string& what) {
  if (p.w.ndim() != 2 || p.bias.ndim() != 1 || p.beta.ndim() != 1 ||
      p.bias.dim(0) != p.w.dim(0) || p.beta.dim(0) != p.w.dim(0))
    throw ShapeError(what + ": inconsistent parameter shapes w" + p.w.shape_str() +
                     " bias" + p.bias.shape_str() + " beta" + p.beta.shape_str());
  for (index_t i = 0; i < p.beta.numel(); ++i) {
    S b = p.beta(i);
    if (!(b >= S(0) && b <= S(1)))
      throw ParamError(what + ": beta[" + std::to_string(i) + "] = " +
                       std::to_string(static_cast<double>(b)) + " outside [0,1]");
  }
  if (!all_finite(p.w) || !all_finite(p.bias))
    throw NumericError(what + ": non-finite parameter");
}

}  // namespace snnkit

#pragma once

#include <cmath>

#include "snnkit/errors.hpp"

namespace snnkit {

// Physical LIF parameters before normalization.
struct LifPhysical {
  double v_rest = 0.0;
  double v_th = 1.0;
  double resistance = 1.0;
  double tau = 10.0;  // ms
};

// Normalized model: threshold 1, rest 0. beta = 0 is a memoryless binary
// neuron, beta = 1 an integrate-and-fire neuron.
struct LifNormalized {
  double beta = 0.9;
  double dt = 1.0;  // ms
};

struct SurrogateCfg {
  double slope = 10.0;
};

inline double normalize_potential(const LifPhysical& p, double v) {
  if (p.v_th == p.v_rest)
    throw ParamError("normalize_potential: degenerate model, v_th == v_rest");
  return (v - p.v_rest) / (p.v_th - p.v_rest);
}

template <class S>
S beta_from_tau(S tau, S dt) {
  if (!(tau > S(0))) throw ParamError("beta_from_tau: tau must be positive");
  if (!(dt > S(0))) throw ParamError("beta_from_tau: dt must be positive");
  return std::exp(-dt / tau);
}

template <class S>
inline S spike_fn(S v) {
  return v > S(1) ? S(1) : S(0);
}

// Derivative surrogate for the spike step, peaked at threshold.
template <class S>
inline S surrogate_grad(S v, S slope) {
  S u = std::abs(v - S(1));
  S d = slope * u + S(1);
  return S(1) / (d * d);
}

template <class S>
inline S clip_beta(S b) {
  if (b > S(1)) return S(1);
  if (b < S(0)) return S(0);
  return b;
}

}  // namespace snnkit

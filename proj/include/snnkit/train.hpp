#pragma once

#include <cstdint>
#include <vector>

#include "snnkit/data.hpp"
#include "snnkit/network.hpp"
#include "snnkit/optim.hpp"

namespace snnkit {

struct TrainConfig {
  index_t epochs = 200;
  double lr = 1e-3;
  index_t batch = 128;
  std::vector<index_t> milestones;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  // Optional controls for evaluation-driven runs.
  double stop_at_test_acc = 0.0;  // 0 = never stop early
  index_t eval_every = 0;         // 0 = no test evaluation during training

  void validate() const;
};

struct EpochMetrics {
  index_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double hidden_spikes_per_neuron = 0.0;  // per neuron per sample
  double wall_ms = 0.0;
  double lr = 0.0;
  double test_acc = -1.0;  // -1 when not evaluated
};

template <class S>
struct TrainResult {
  Network<S> net;        // final parameters
  Network<S> best;       // lowest-training-loss parameters
  double best_loss = 0.0;
  index_t best_epoch = -1;
  std::vector<EpochMetrics> log;
  index_t epochs_run = 0;
};

template <class S>
TrainResult<S> train(const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                     const BatchSource<S>& train_data,
                     const BatchSource<S>* test_data = nullptr, bool verbose = false);

struct EvalResult {
  double accuracy = 0.0;
  double hidden_spikes_per_sample = 0.0;
  double hidden_spikes_per_neuron = 0.0;
};

template <class S>
EvalResult evaluate(const Network<S>& net, const BatchSource<S>& data, index_t batch);

}  // namespace snnkit

#pragma once

#include <optional>
#include <string>

#include "snnkit/network.hpp"
#include "snnkit/optim.hpp"

namespace snnkit {

// "SNNC" container: config echo as JSON, parameter tensors (values stored as
// f64 little-endian), optional optimizer state, epoch and best-loss record.
template <class S>
struct Checkpoint {
  Network<S> net;
  std::optional<std::vector<Tensor<S>>> adam_m;
  std::optional<std::vector<Tensor<S>>> adam_v;
  std::int64_t adam_steps = 0;
  index_t epoch = 0;
  double best_loss = 0.0;
};

std::string network_config_to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const std::string& json_text);

std::string backend_to_string(ConvBackend b);
ConvBackend backend_from_string(const std::string& s);

template <class S>
void save_checkpoint(const std::string& path, const Network<S>& net, Adam<S>* adam,
                     index_t epoch, double best_loss);

template <class S>
Checkpoint<S> load_checkpoint(const std::string& path);

}  // namespace snnkit

#include "snnkit/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace snnkit {
namespace {

template <class S>
index_t argmax_row(const Tensor<S>& scores, index_t row) {
  const index_t c = scores.dim(1);
  index_t best = 0;
  for (index_t ci = 1; ci < c; ++ci)
    if (scores(row, ci) > scores(row, best)) best = ci;
  return best;
}

template <class S>
void copy_params(const Network<S>& from, Network<S>& to) {
  for (std::size_t l = 0; l < from.hidden.size(); ++l) {
    to.hidden[l].w = from.hidden[l].w;
    to.hidden[l].bias = from.hidden[l].bias;
    to.hidden[l].beta = from.hidden[l].beta;
  }
  to.readout.w = from.readout.w;
  to.readout.bias = from.readout.bias;
  to.readout.beta = from.readout.beta;
}

template <class S>
void clip_betas(Network<S>& net) {
  for (auto& p : net.hidden)
    for (index_t i = 0; i < p.beta.numel(); ++i) p.beta(i) = clip_beta(p.beta(i));
  for (index_t i = 0; i < net.readout.beta.numel(); ++i)
    net.readout.beta(i) = clip_beta(net.readout.beta(i));
}

index_t hidden_neuron_count(const NetworkConfig& cfg) {
  index_t n = 0;
  for (std::size_t l = 1; l + 1 < cfg.sizes.size(); ++l) n += cfg.sizes[l];
  return n;
}

template <class S>
void check_data(const NetworkConfig& cfg, const BatchSource<S>& data, const char* which) {
  if (data.n_in() != cfg.n_in())
    throw ParamError(std::string(which) + " data has " + std::to_string(data.n_in()) +
                     " inputs, network expects " + std::to_string(cfg.n_in()));
  if (static_cast<index_t>(data.n_classes()) != cfg.n_classes())
    throw ParamError(std::string(which) + " data has " + std::to_string(data.n_classes()) +
                     " classes, network expects " + std::to_string(cfg.n_classes()));
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ParamError("train: epochs must be non-negative");
  if (!(lr > 0)) throw ParamError("train: lr must be positive");
  if (batch < 1) throw ParamError("train: batch size must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ParamError("train: adam betas must lie in [0,1)");
  if (!(eps > 0)) throw ParamError("train: adam eps must be positive");
  if (stop_at_test_acc < 0 || stop_at_test_acc > 1)
    throw ParamError("train: stop_at_test_acc must lie in [0,1]");
  if (eval_every < 0) throw ParamError("train: eval_every must be non-negative");
}

template <class S>
TrainResult<S> train(const NetworkConfig& net_cfg, const TrainConfig& train_cfg,
                     const BatchSource<S>& train_data, const BatchSource<S>* test_data,
                     bool verbose) {
  net_cfg.validate();
  train_cfg.validate();
  check_data(net_cfg, train_data, "training");
  if (test_data) check_data(net_cfg, *test_data, "test");
  const index_t n = train_data.size();
  if (n == 0) throw DataError("train: training set is empty");

  TrainResult<S> res;
  res.net = init_network<S>(net_cfg);
  res.best = res.net;
  res.best_loss = std::numeric_limits<double>::infinity();

  std::vector<Tensor<S>*> params;
  res.net.for_each_param([&](const std::string&, Tensor<S>& t) { params.push_back(&t); });
  Adam<S> adam(train_cfg.beta1, train_cfg.beta2, train_cfg.eps);
  adam.attach(params);

  Rng root(net_cfg.seed);
  std::vector<index_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), index_t{0});
  const index_t hidden_neurons = hidden_neuron_count(net_cfg);

  Tensor<S> spikes;
  std::vector<int> labels;
  NetTrace<S> trace;
  NetGrads<S> grads;

  for (index_t epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, train_cfg.milestones, train_cfg.lr);
    const bool at_milestone = std::find(train_cfg.milestones.begin(),
                                        train_cfg.milestones.end(),
                                        epoch) != train_cfg.milestones.end();
    if (at_milestone && res.best_epoch >= 0) copy_params(res.best, res.net);

    Rng shuffler = root.child(0xE0000ULL + static_cast<std::uint64_t>(epoch));
    shuffler.shuffle(order);

    double loss_sum = 0.0, spikes_sum = 0.0;
    index_t correct = 0;
    for (index_t start = 0; start < n; start += train_cfg.batch) {
      const index_t count = std::min(train_cfg.batch, n - start);
      train_data.fetch(order.data() + start, count, net_cfg.T, spikes, labels);
      network_forward(res.net, spikes, trace);
      auto [loss, g_scores] = softmax_xent(trace.scores, labels);
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(start / train_cfg.batch));
      loss_sum += loss * static_cast<double>(count);
      for (index_t bi = 0; bi < count; ++bi)
        if (argmax_row(trace.scores, bi) == labels[static_cast<std::size_t>(bi)]) ++correct;
      spikes_sum += count_hidden_spikes(trace);

      network_backward(res.net, spikes, trace, g_scores, grads);
      std::vector<const Tensor<S>*> grad_ptrs;
      for (auto& g : grads.hidden) {
        grad_ptrs.push_back(&g.w);
        grad_ptrs.push_back(&g.bias);
        grad_ptrs.push_back(&g.beta);
      }
      grad_ptrs.push_back(&grads.readout.w);
      grad_ptrs.push_back(&grads.readout.bias);
      grad_ptrs.push_back(&grads.readout.beta);
      adam.step(params, grad_ptrs, lr);
      clip_betas(res.net);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(n);
    m.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    m.hidden_spikes_per_neuron =
        hidden_neurons > 0
            ? spikes_sum / (static_cast<double>(n) * static_cast<double>(hidden_neurons))
            : 0.0;
    m.lr = lr;
    if (m.loss < res.best_loss) {
      res.best_loss = m.loss;
      res.best_epoch = epoch;
      copy_params(res.net, res.best);
    }

    bool stop = false;
    if (test_data && train_cfg.eval_every > 0 &&
        (epoch % train_cfg.eval_every == 0 || epoch == train_cfg.epochs - 1)) {
      m.test_acc = evaluate(res.net, *test_data, train_cfg.batch).accuracy;
      if (train_cfg.stop_at_test_acc > 0 && m.test_acc >= train_cfg.stop_at_test_acc)
        stop = true;
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    res.log.push_back(m);
    res.epochs_run = epoch + 1;
    if (verbose) {
      std::printf("epoch %4lld  loss %.4f  acc %.4f  spikes/neuron %.3f  lr %.2e  %.0f ms",
                  static_cast<long long>(epoch), m.loss, m.train_acc,
                  m.hidden_spikes_per_neuron, m.lr, m.wall_ms);
      if (m.test_acc >= 0) std::printf("  test %.4f", m.test_acc);
      std::printf("\n");
      std::fflush(stdout);
    }
    if (stop) break;
  }
  return res;
}

template <class S>
EvalResult evaluate(const Network<S>& net, const BatchSource<S>& data, index_t batch) {
  if (batch < 1) throw ParamError("evaluate: batch size must be positive");
  const index_t n = data.size();
  if (n == 0) throw DataError("evaluate: data set is empty");
  check_data(net.cfg, data, "evaluation");

  std::vector<index_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), index_t{0});
  Tensor<S> spikes;
  std::vector<int> labels;
  NetTrace<S> trace;
  index_t correct = 0;
  double spikes_sum = 0.0;
  for (index_t start = 0; start < n; start += batch) {
    const index_t count = std::min(batch, n - start);
    data.fetch(order.data() + start, count, net.cfg.T, spikes, labels);
    network_forward(net, spikes, trace);
    for (index_t bi = 0; bi < count; ++bi)
      if (argmax_row(trace.scores, bi) == labels[static_cast<std::size_t>(bi)]) ++correct;
    spikes_sum += count_hidden_spikes(trace);
  }

  EvalResult r;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.hidden_spikes_per_sample = spikes_sum / static_cast<double>(n);
  const index_t hidden_neurons = hidden_neuron_count(net.cfg);
  r.hidden_spikes_per_neuron =
      hidden_neurons > 0 ? r.hidden_spikes_per_sample / static_cast<double>(hidden_neurons)
                         : 0.0;
  return r;
}

template TrainResult<float> train<float>(const NetworkConfig&, const TrainConfig&,
                                         const BatchSource<float>&, const BatchSource<float>*,
                                         bool);
template TrainResult<double> train<double>(const NetworkConfig&, const TrainConfig&,
                                           const BatchSource<double>&,
                                           const BatchSource<double>*, bool);
template EvalResult evaluate<float>(const Network<float>&, const BatchSource<float>&, index_t);
template EvalResult evaluate<double>(const Network<double>&, const BatchSource<double>&, index_t);

}  // namespace snnkit

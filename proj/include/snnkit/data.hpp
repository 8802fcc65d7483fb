#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "snnkit/rng.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// Poisson-like benchmark spikes: per batch element a rate r_b ~ U(lo,hi) Hz,
// each neuron-timestep an independent spike with probability r_b * dt_ms/1000.
template <class S>
Tensor<S> gen_synthetic(index_t b, index_t n, index_t t, double dt_ms, double rate_lo_hz,
                        double rate_hi_hz, std::uint64_t seed);

struct TtfsEncoderCfg {
  double i_max = 1.0;
  index_t T = 100;
};

// Latency coding: t_i = floor((i_max - I)/i_max * T); t_i == T means no spike.
template <class S>
Tensor<S> ttfs_encode(const Tensor<float>& values, const TtfsEncoderCfg& cfg);

// Three-class taijitu labels on the unit-square disk. Classes: 0 yin, 1 yang,
// 2 dot. The casewise rule below partitions the disk deterministically.
int yinyang_label(double x, double y);

// Points (x, y, 1-x, 1-y) rejection-sampled to class counts within 1 of each
// other.
std::pair<Tensor<float>, std::vector<int>> gen_yinyang(index_t n_samples,
                                                       std::uint64_t seed);

// Big-endian IDX files; pixels scaled to [0,1].
std::pair<Tensor<float>, std::vector<int>> load_mnist_idx(const std::string& images_path,
                                                          const std::string& labels_path);

struct SnntData {
  Tensor<float> spikes;  // B x N x T binary
  std::vector<std::uint16_t> labels;  // empty for unlabeled sets
  double dt_ms = 1.0;
};

// "SNNT" container: u32 version, dims, dt, labels, spike payload bit-packed
// along the time axis, little-endian throughout.
void save_spikes(const std::string& path, const SnntData& data);
SnntData load_spikes(const std::string& path);

// Batch provider for training: materialized spikes or lazily TTFS-encoded
// images.
template <class S>
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual index_t size() const = 0;
  virtual index_t n_in() const = 0;
  virtual int n_classes() const = 0;
  virtual void fetch(const index_t* idx, index_t count, index_t T, Tensor<S>& spikes,
                     std::vector<int>& labels) const = 0;
};

template <class S>
class MaterializedDataset : public BatchSource<S> {
 public:
  MaterializedDataset(Tensor<S> spikes, std::vector<int> labels, int classes);
  index_t size() const override { return spikes_.dim(0); }
  index_t n_in() const override { return spikes_.dim(1); }
  int n_classes() const override { return classes_; }
  void fetch(const index_t* idx, index_t count, index_t T, Tensor<S>& spikes,
             std::vector<int>& labels) const override;

 private:
  Tensor<S> spikes_;
  std::vector<int> labels_;
  int classes_;
};

template <class S>
class TtfsDataset : public BatchSource<S> {
 public:
  TtfsDataset(Tensor<float> values, std::vector<int> labels, int classes,
              double i_max = 1.0);
  index_t size() const override { return values_.dim(0); }
  index_t n_in() const override { return values_.dim(1); }
  int n_classes() const override { return classes_; }
  void fetch(const index_t* idx, index_t count, index_t T, Tensor<S>& spikes,
             std::vector<int>& labels) const override;

 private:
  Tensor<float> values_;
  std::vector<int> labels_;
  int classes_;
  double i_max_;
};

}  // namespace snnkit

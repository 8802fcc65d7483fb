#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snnkit/network.hpp"

namespace snnkit {

enum class BetaBenchMode { Trainable, Fixed, Both };

struct SweepSpec {
  std::vector<index_t> units{100};
  std::vector<index_t> steps{128};
  std::vector<index_t> batches{128};
  std::vector<index_t> layer_counts{1};
  std::vector<ModelVariant> models{ModelVariant::FastSingle, ModelVariant::SeqSingle};
  index_t reps = 10;
  index_t warmup = 3;
  BetaBenchMode beta_mode = BetaBenchMode::Trainable;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BenchRecord {
  std::string model;  // variant id, "-fixedbeta" suffix in fixed mode
  index_t n = 0, t = 0, b = 0, layers = 0;
  double fwd_ms = 0.0;
  double bwd_ms = 0.0;
  double total_ms = 0.0;
  double mad_ms = 0.0;
  double speedup_vs_seq = -1.0;  // <0 = blank (baseline row or no baseline)
  bool skipped = false;
  std::string skip_reason;
};

struct PassTimes {
  double fwd_ms = 0.0;
  double bwd_ms = 0.0;
  double total_ms = 0.0;
  double mad_ms = 0.0;
};

// Median-of-reps timing of one forward+backward training step on a fixed,
// pre-generated batch. Data generation and initialization stay outside the
// timed region; a sum-of-readout dummy loss drives the backward pass.
template <class S>
PassTimes time_pass(const Network<S>& net, const Tensor<S>& batch, index_t reps,
                    index_t warmup);

std::vector<BenchRecord> run_sweep(const SweepSpec& spec, bool verbose = false);

// CSV columns: model,n,t,b,layers,fwd_ms,bwd_ms,total_ms,mad_ms,speedup_vs_seq
// (speedup blank on baseline rows). JSON mirrors the fields plus skipped rows.
void emit_report(const std::vector<BenchRecord>& records, const std::string& path,
                 const std::string& format);

std::vector<BenchRecord> parse_report_json(const std::string& path);

}  // namespace snnkit

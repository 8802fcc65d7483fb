#include "snnkit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <new>
#include <vector>

#include <json.hpp>

#include "snnkit/data.hpp"
#include "snnkit/rng.hpp"

namespace snnkit {
namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<ModelVariant> baseline_first(const std::vector<ModelVariant>& models) {
  std::vector<ModelVariant> out;
  for (ModelVariant m : models)
    if (m == ModelVariant::SeqSingle) out.push_back(m);
  for (ModelVariant m : models)
    if (m != ModelVariant::SeqSingle) out.push_back(m);
  return out;
}

NetworkConfig point_config(index_t n, index_t t, index_t layers, ModelVariant variant,
                           bool trainable, std::uint64_t seed) {
  NetworkConfig cfg;
  cfg.sizes.assign(static_cast<std::size_t>(layers) + 1, n);
  cfg.sizes.push_back(10);
  cfg.variant = variant;
  cfg.T = t;
  cfg.dt = 1.0;
  cfg.readout = ReadoutMode::Sum;
  cfg.trainable_beta = trainable;
  cfg.seed = seed;
  return cfg;
}

void append_csv_value(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  line += buf;
}

}  // namespace

void SweepSpec::validate() const {
  if (reps < 3) throw ParamError("bench: reps must be at least 3");
  if (warmup < 1) throw ParamError("bench: warmup must be at least 1");
  if (models.empty()) throw ParamError("bench: no models selected");
  auto check = [](const std::vector<index_t>& v, const char* what) {
    if (v.empty()) throw ParamError(std::string("bench: empty ") + what + " list");
    for (index_t x : v)
      if (x < 1) throw ParamError(std::string("bench: ") + what + " entries must be positive");
  };
  check(units, "units");
  check(steps, "steps");
  check(batches, "batch");
  check(layer_counts, "layers");
}

template <class S>
PassTimes time_pass(const Network<S>& net, const Tensor<S>& batch, index_t reps,
                    index_t warmup) {
  if (reps < 1) throw ParamError("bench: reps must be positive");
  if (warmup < 0) throw ParamError("bench: warmup must be non-negative");

  using clock = std::chrono::steady_clock;
  NetTrace<S> trace;
  NetGrads<S> grads;
  const Tensor<S> g_scores = Tensor<S>::full({batch.dim(0), net.cfg.n_classes()}, S(1));

  std::vector<double> fwd, bwd, total;
  fwd.reserve(static_cast<std::size_t>(reps));
  bwd.reserve(static_cast<std::size_t>(reps));
  total.reserve(static_cast<std::size_t>(reps));
  for (index_t i = 0; i < warmup + reps; ++i) {
    const auto t0 = clock::now();
    network_forward(net, batch, trace);
    const auto t1 = clock::now();
    network_backward(net, batch, trace, g_scores, grads);
    const auto t2 = clock::now();
    if (i == 0 && !all_finite(trace.scores))
      throw NumericError("bench: non-finite scores in the timed model");
    if (i >= warmup) {
      fwd.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      bwd.push_back(std::chrono::duration<double, std::milli>(t2 - t1).count());
      total.push_back(std::chrono::duration<double, std::milli>(t2 - t0).count());
    }
  }

  PassTimes pt;
  pt.fwd_ms = median(fwd);
  pt.bwd_ms = median(bwd);
  pt.total_ms = median(total);
  std::vector<double> dev;
  dev.reserve(total.size());
  for (double x : total) dev.push_back(std::abs(x - pt.total_ms));
  pt.mad_ms = median(dev);
  return pt;
}

std::vector<BenchRecord> run_sweep(const SweepSpec& spec, bool verbose) {
  spec.validate();
  const std::vector<ModelVariant> models = baseline_first(spec.models);
  std::vector<bool> beta_modes;
  if (spec.beta_mode == BetaBenchMode::Trainable || spec.beta_mode == BetaBenchMode::Both)
    beta_modes.push_back(true);
  if (spec.beta_mode == BetaBenchMode::Fixed || spec.beta_mode == BetaBenchMode::Both)
    beta_modes.push_back(false);

  std::vector<BenchRecord> records;
  Rng root(spec.seed);
  std::uint64_t point_id = 0;
  for (index_t n : spec.units) {
    for (index_t t : spec.steps) {
      for (index_t b : spec.batches) {
        for (index_t layers : spec.layer_counts) {
          const std::uint64_t data_seed = root.child(point_id++).seed();
          Tensor<float> batch;
          bool have_data = true;
          std::string data_failure;
          try {
            batch = gen_synthetic<float>(b, n, t, 1.0, 0.0, 200.0, data_seed);
          } catch (const std::bad_alloc&) {
            have_data = false;
            data_failure = "out of memory generating data";
          }
          for (bool trainable : beta_modes) {
            double seq_total = -1.0;
            for (ModelVariant variant : models) {
              BenchRecord rec;
              rec.model = to_string(variant) + (trainable ? "" : "-fixedbeta");
              rec.n = n;
              rec.t = t;
              rec.b = b;
              rec.layers = layers;
              if (!have_data) {
                rec.skipped = true;
                rec.skip_reason = data_failure;
                records.push_back(rec);
                continue;
              }
              try {
                const Network<float> net =
                    init_network<float>(point_config(n, t, layers, variant, trainable,
                                                     spec.seed));
                const PassTimes pt = time_pass(net, batch, spec.reps, spec.warmup);
                rec.fwd_ms = pt.fwd_ms;
                rec.bwd_ms = pt.bwd_ms;
                rec.total_ms = pt.total_ms;
                rec.mad_ms = pt.mad_ms;
                if (variant == ModelVariant::SeqSingle)
                  seq_total = pt.total_ms;
                else if (seq_total > 0)
                  rec.speedup_vs_seq = seq_total / pt.total_ms;
              } catch (const std::bad_alloc&) {
                rec.skipped = true;
                rec.skip_reason = "out of memory";
              }
              records.push_back(rec);
              if (verbose) {
                const BenchRecord& r = records.back();
                if (r.skipped)
                  std::printf("%-24s n=%-5lld t=%-5lld b=%-4lld layers=%lld  skipped (%s)\n",
                              r.model.c_str(), static_cast<long long>(r.n),
                              static_cast<long long>(r.t), static_cast<long long>(r.b),
                              static_cast<long long>(r.layers), r.skip_reason.c_str());
                else if (r.speedup_vs_seq > 0)
                  std::printf("%-24s n=%-5lld t=%-5lld b=%-4lld layers=%lld  fwd %9.3f ms  "
                              "bwd %9.3f ms  total %9.3f ms  (x%.2f vs seq)\n",
                              r.model.c_str(), static_cast<long long>(r.n),
                              static_cast<long long>(r.t), static_cast<long long>(r.b),
                              static_cast<long long>(r.layers), r.fwd_ms, r.bwd_ms, r.total_ms,
                              r.speedup_vs_seq);
                else
                  std::printf("%-24s n=%-5lld t=%-5lld b=%-4lld layers=%lld  fwd %9.3f ms  "
                              "bwd %9.3f ms  total %9.3f ms\n",
                              r.model.c_str(), static_cast<long long>(r.n),
                              static_cast<long long>(r.t), static_cast<long long>(r.b),
                              static_cast<long long>(r.layers), r.fwd_ms, r.bwd_ms, r.total_ms);
                std::fflush(stdout);
              }
            }
          }
        }
      }
    }
  }
  return records;
}

void emit_report(const std::vector<BenchRecord>& records, const std::string& path,
                 const std::string& format) {
  if (records.empty()) throw ParamError("bench: no records to report");
  if (format == "csv") {
    std::ofstream os(path);
    if (!os) throw IoError("bench: cannot write " + path);
    os << "model,n,t,b,layers,fwd_ms,bwd_ms,total_ms,mad_ms,speedup_vs_seq\n";
    for (const BenchRecord& r : records) {
      if (r.skipped) continue;
      std::string line = r.model;
      line += ',';
      line += std::to_string(r.n) + ',' + std::to_string(r.t) + ',' + std::to_string(r.b) +
              ',' + std::to_string(r.layers) + ',';
      append_csv_value(line, r.fwd_ms);
      line += ',';
      append_csv_value(line, r.bwd_ms);
      line += ',';
      append_csv_value(line, r.total_ms);
      line += ',';
      append_csv_value(line, r.mad_ms);
      line += ',';
      if (r.speedup_vs_seq >= 0) append_csv_value(line, r.speedup_vs_seq);
      os << line << "\n";
    }
    if (!os) throw IoError("bench: write failed for " + path);
  } else if (format == "json") {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["records"] = nlohmann::json::array();
    j["skipped"] = nlohmann::json::array();
    for (const BenchRecord& r : records) {
      if (r.skipped) {
        j["skipped"].push_back({{"model", r.model},
                                {"n", r.n},
                                {"t", r.t},
                                {"b", r.b},
                                {"layers", r.layers},
                                {"reason", r.skip_reason}});
        continue;
      }
      nlohmann::json rec = {{"model", r.model},   {"n", r.n},
                            {"t", r.t},           {"b", r.b},
                            {"layers", r.layers}, {"fwd_ms", r.fwd_ms},
                            {"bwd_ms", r.bwd_ms}, {"total_ms", r.total_ms},
                            {"mad_ms", r.mad_ms}};
      if (r.speedup_vs_seq >= 0)
        rec["speedup_vs_seq"] = r.speedup_vs_seq;
      else
        rec["speedup_vs_seq"] = nullptr;
      j["records"].push_back(std::move(rec));
    }
    std::ofstream os(path);
    if (!os) throw IoError("bench: cannot write " + path);
    os << j.dump(2) << "\n";
    if (!os) throw IoError("bench: write failed for " + path);
  } else {
    throw ParamError("bench: unknown report format '" + format + "'");
  }
}

std::vector<BenchRecord> parse_report_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("bench: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bench: invalid report JSON: " + std::string(e.what()));
  }
  std::vector<BenchRecord> records;
  try {
    for (const auto& rec : j.at("records")) {
      BenchRecord r;
      r.model = rec.at("model").get<std::string>();
      r.n = rec.at("n").get<index_t>();
      r.t = rec.at("t").get<index_t>();
      r.b = rec.at("b").get<index_t>();
      r.layers = rec.at("layers").get<index_t>();
      r.fwd_ms = rec.at("fwd_ms").get<double>();
      r.bwd_ms = rec.at("bwd_ms").get<double>();
      r.total_ms = rec.at("total_ms").get<double>();
      r.mad_ms = rec.at("mad_ms").get<double>();
      r.speedup_vs_seq =
          rec.at("speedup_vs_seq").is_null() ? -1.0 : rec.at("speedup_vs_seq").get<double>();
      records.push_back(std::move(r));
    }
    for (const auto& rec : j.at("skipped")) {
      BenchRecord r;
      r.model = rec.at("model").get<std::string>();
      r.n = rec.at("n").get<index_t>();
      r.t = rec.at("t").get<index_t>();
      r.b = rec.at("b").get<index_t>();
      r.layers = rec.at("layers").get<index_t>();
      r.skipped = true;
      r.skip_reason = rec.at("reason").get<std::string>();
      records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bench: malformed report: " + std::string(e.what()));
  }
  return records;
}

template PassTimes time_pass<float>(const Network<float>&, const Tensor<float>&, index_t,
                                    index_t);
template PassTimes time_pass<double>(const Network<double>&, const Tensor<double>&, index_t,
                                     index_t);

}  // namespace snnkit

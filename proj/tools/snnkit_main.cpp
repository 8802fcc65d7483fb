#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "snnkit/bench.hpp"
#include "snnkit/checkpoint.hpp"
#include "snnkit/data.hpp"
#include "snnkit/errors.hpp"
#include "snnkit/train.hpp"

namespace {

using json = nlohmann::json;
using namespace snnkit;

ModelVariant parse_model_alias(const std::string& s) {
  if (s == "fast" || s == "fast-single") return ModelVariant::FastSingle;
  if (s == "seq" || s == "seq-single") return ModelVariant::SeqSingle;
  if (s == "seq-multi" || s == "multi") return ModelVariant::SeqMulti;
  throw ParamError("unknown model '" + s + "' (expected fast, seq-single, or seq-multi)");
}

// "0..200" is a uniform range; a bare number is a fixed rate.
void parse_rate_range(const std::string& s, double& lo, double& hi) {
  try {
    auto pos = s.find("..");
    if (pos == std::string::npos) {
      lo = hi = std::stod(s);
    } else {
      lo = std::stod(s.substr(0, pos));
      hi = std::stod(s.substr(pos + 2));
    }
  } catch (const std::exception&) {
    throw ParamError("bad rate '" + s + "' (expected e.g. 200 or 0..200)");
  }
  if (lo < 0 || hi < lo) throw ParamError("bad rate range [" + s + "]");
}

std::string report_format(const std::string& requested, const std::string& path) {
  if (!requested.empty()) return requested;
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") return "json";
  return "csv";
}

std::vector<std::uint16_t> to_u16_labels(const std::vector<int>& labels) {
  std::vector<std::uint16_t> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(static_cast<std::uint16_t>(l));
  return out;
}

std::vector<int> to_int_labels(const std::vector<std::uint16_t>& labels) {
  return std::vector<int>(labels.begin(), labels.end());
}

struct BenchArgs {
  std::vector<long long> units{100};
  std::vector<long long> steps{128};
  std::vector<long long> batch{128};
  std::vector<long long> layers{1};
  std::vector<std::string> models{"fast", "seq-single"};
  long long reps = 10;
  long long warmup = 3;
  std::string fixed_beta = "false";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;
  std::string format;
};

void run_bench(const BenchArgs& a) {
  Eigen::setNbThreads(a.threads);
  SweepSpec spec;
  spec.units.assign(a.units.begin(), a.units.end());
  spec.steps.assign(a.steps.begin(), a.steps.end());
  spec.batches.assign(a.batch.begin(), a.batch.end());
  spec.layer_counts.assign(a.layers.begin(), a.layers.end());
  spec.models.clear();
  for (const auto& m : a.models) spec.models.push_back(parse_model_alias(m));
  spec.reps = a.reps;
  spec.warmup = a.warmup;
  spec.seed = a.seed;
  if (a.fixed_beta == "true" || a.fixed_beta == "1")
    spec.beta_mode = BetaBenchMode::Fixed;
  else if (a.fixed_beta == "false" || a.fixed_beta == "0")
    spec.beta_mode = BetaBenchMode::Trainable;
  else if (a.fixed_beta == "both")
    spec.beta_mode = BetaBenchMode::Both;
  else
    throw ParamError("--fixed-beta expects true, false, or both");

  auto records = run_sweep(spec, /*verbose=*/true);
  if (!a.out.empty()) {
    emit_report(records, a.out, report_format(a.format, a.out));
    std::printf("report written to %s\n", a.out.c_str());
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

template <class T>
T get_or(const json& j, const char* key, T dflt) {
  try {
    return j.value(key, dflt);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

struct LoadedData {
  std::unique_ptr<BatchSource<float>> train;
  std::unique_ptr<BatchSource<float>> test;  // may be null
};

LoadedData make_datasets(const json& j, int n_classes) {
  const std::string kind = get_or<std::string>(j, "dataset", "");
  LoadedData d;
  if (kind == "snnt") {
    auto load = [&](const std::string& path) -> std::unique_ptr<BatchSource<float>> {
      SnntData raw = load_spikes(path);
      return std::make_unique<MaterializedDataset<float>>(std::move(raw.spikes),
                                                          to_int_labels(raw.labels), n_classes);
    };
    const std::string train_path = get_or<std::string>(j, "train_data", "");
    if (train_path.empty()) throw ConfigError("dataset 'snnt' needs \"train_data\"");
    d.train = load(train_path);
    const std::string test_path = get_or<std::string>(j, "test_data", "");
    if (!test_path.empty()) d.test = load(test_path);
  } else if (kind == "yinyang") {
    const auto n_train = get_or<long long>(j, "train_samples", 0);
    const auto n_test = get_or<long long>(j, "test_samples", 0);
    const auto seed = get_or<std::uint64_t>(j, "data_seed", 7);
    if (n_train <= 0) throw ConfigError("dataset 'yinyang' needs \"train_samples\" > 0");
    auto [pts, labels] = gen_yinyang(n_train, seed);
    d.train = std::make_unique<TtfsDataset<float>>(std::move(pts), std::move(labels), n_classes);
    if (n_test > 0) {
      auto [tp, tl] = gen_yinyang(n_test, seed + 1);
      d.test = std::make_unique<TtfsDataset<float>>(std::move(tp), std::move(tl), n_classes);
    }
  } else if (kind == "mnist") {
    auto load = [&](const std::string& imgs,
                    const std::string& labs) -> std::unique_ptr<BatchSource<float>> {
      auto [values, labels] = load_mnist_idx(imgs, labs);
      return std::make_unique<TtfsDataset<float>>(std::move(values), std::move(labels),
                                                  n_classes);
    };
    const std::string imgs = get_or<std::string>(j, "train_images", "");
    const std::string labs = get_or<std::string>(j, "train_labels", "");
    if (imgs.empty() || labs.empty())
      throw ConfigError("dataset 'mnist' needs \"train_images\" and \"train_labels\"");
    d.train = load(imgs, labs);
    const std::string timgs = get_or<std::string>(j, "test_images", "");
    const std::string tlabs = get_or<std::string>(j, "test_labels", "");
    if (!timgs.empty() && !tlabs.empty()) d.test = load(timgs, tlabs);
  } else {
    throw ConfigError("config needs \"dataset\": one of snnt, yinyang, mnist");
  }
  return d;
}

void run_train(const std::string& config_path, bool quiet) {
  const json j = load_json_file(config_path);

  NetworkConfig net_cfg;
  if (!j.contains("sizes")) throw ConfigError("config needs \"sizes\"");
  net_cfg.sizes = j.at("sizes").get<std::vector<index_t>>();
  net_cfg.T = get_or<index_t>(j, "t", net_cfg.T);
  net_cfg.dt = get_or<double>(j, "dt", net_cfg.dt);
  net_cfg.variant = model_variant_from_string(
      get_or<std::string>(j, "variant", to_string(net_cfg.variant)));
  net_cfg.readout = readout_mode_from_string(
      get_or<std::string>(j, "output", to_string(net_cfg.readout)));
  net_cfg.surrogate_slope = get_or<double>(j, "surrogate_slope", net_cfg.surrogate_slope);
  net_cfg.trainable_beta = get_or<bool>(j, "trainable_beta", net_cfg.trainable_beta);
  net_cfg.seed = get_or<std::uint64_t>(j, "seed", net_cfg.seed);
  net_cfg.init_gain = get_or<double>(j, "init_gain", net_cfg.init_gain);
  net_cfg.zero_hidden_init = get_or<bool>(j, "zero_hidden_init", net_cfg.zero_hidden_init);
  net_cfg.tau_hidden = get_or<double>(j, "tau_hidden", net_cfg.tau_hidden);
  net_cfg.tau_readout = get_or<double>(j, "tau_readout", net_cfg.tau_readout);
  net_cfg.backend = backend_from_string(get_or<std::string>(j, "backend", "auto"));
  net_cfg.validate();

  TrainConfig tr;
  tr.epochs = get_or<index_t>(j, "epochs", tr.epochs);
  tr.lr = get_or<double>(j, "lr", tr.lr);
  tr.batch = get_or<index_t>(j, "batch", tr.batch);
  if (j.contains("milestones")) tr.milestones = j.at("milestones").get<std::vector<index_t>>();
  tr.stop_at_test_acc = get_or<double>(j, "stop_at_test_acc", tr.stop_at_test_acc);
  tr.eval_every = get_or<index_t>(j, "eval_every", tr.eval_every);
  tr.validate();

  LoadedData data = make_datasets(j, static_cast<int>(net_cfg.n_classes()));
  auto result = train<float>(net_cfg, tr, *data.train, data.test.get(), !quiet);

  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::printf("done: %lld epochs, final loss %.4f acc %.4f", (long long)result.epochs_run,
                last.loss, last.train_acc);
    if (last.test_acc >= 0) std::printf(" test_acc %.4f", last.test_acc);
    std::printf("\n");
  }
  if (result.best_epoch >= 0)
    std::printf("best: epoch %lld loss %.4f\n", (long long)result.best_epoch, result.best_loss);

  const std::string ckpt_dir = get_or<std::string>(j, "checkpoint_dir", "");
  if (!ckpt_dir.empty()) {
    std::filesystem::create_directories(ckpt_dir);
    const std::string final_path = ckpt_dir + "/final.snnc";
    save_checkpoint<float>(final_path, result.net, nullptr, result.epochs_run, result.best_loss);
    std::printf("checkpoint written to %s\n", final_path.c_str());
    if (result.best_epoch >= 0) {
      const std::string best_path = ckpt_dir + "/best.snnc";
      save_checkpoint<float>(best_path, result.best, nullptr, result.best_epoch,
                             result.best_loss);
      std::printf("checkpoint written to %s\n", best_path.c_str());
    }
  }
}

void run_eval(const std::string& ckpt_path, const std::string& data_path, index_t batch) {
  Checkpoint<float> ckpt = load_checkpoint<float>(ckpt_path);
  SnntData raw = load_spikes(data_path);
  if (raw.labels.empty()) throw LabelError("eval: " + data_path + " has no labels");
  MaterializedDataset<float> data(std::move(raw.spikes), to_int_labels(raw.labels),
                                  static_cast<int>(ckpt.net.cfg.n_classes()));
  EvalResult r = evaluate(ckpt.net, data, batch);
  std::printf("accuracy %.4f\n", r.accuracy);
  std::printf("hidden spikes per sample %.3f (per neuron %.4f)\n", r.hidden_spikes_per_sample,
              r.hidden_spikes_per_neuron);
}

void run_gen_yinyang(long long n, std::uint64_t seed, index_t t, const std::string& out) {
  auto [pts, labels] = gen_yinyang(n, seed);
  SnntData data;
  data.spikes = ttfs_encode<float>(pts, TtfsEncoderCfg{1.0, t});
  data.labels = to_u16_labels(labels);
  data.dt_ms = 1.0;
  save_spikes(out, data);
  std::printf("wrote %lld samples (%lld x %lld x %lld) to %s\n", n, (long long)data.spikes.dim(0),
              (long long)data.spikes.dim(1), (long long)data.spikes.dim(2), out.c_str());
}

void run_gen_synth(long long b, long long n, long long t, const std::string& rate, double dt,
                   std::uint64_t seed, const std::string& out) {
  double lo = 0, hi = 0;
  parse_rate_range(rate, lo, hi);
  SnntData data;
  data.spikes = gen_synthetic<float>(b, n, t, dt, lo, hi, seed);
  data.dt_ms = dt;
  save_spikes(out, data);
  std::printf("wrote %lld x %lld x %lld spikes (rates %g..%g Hz) to %s\n", b, n, t, lo, hi,
              out.c_str());
}

void run_encode_ttfs(const std::string& idx, const std::string& labels, index_t t,
                     const std::string& out) {
  auto [values, int_labels] = load_mnist_idx(idx, labels);
  SnntData data;
  data.spikes = ttfs_encode<float>(values, TtfsEncoderCfg{1.0, t});
  data.labels = to_u16_labels(int_labels);
  data.dt_ms = 1.0;
  save_spikes(out, data);
  std::printf("encoded %lld images to %s\n", (long long)data.spikes.dim(0), out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-spike SNN training and benchmarking"};
  app.require_subcommand(1);

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "timed forward/backward sweeps");
  bench->add_option("--units", ba.units, "hidden unit counts")->delimiter(',');
  bench->add_option("--steps", ba.steps, "timestep counts")->delimiter(',');
  bench->add_option("--batch", ba.batch, "batch sizes")->delimiter(',');
  bench->add_option("--layers", ba.layers, "hidden layer counts")->delimiter(',');
  bench->add_option("--models", ba.models, "fast, seq-single, seq-multi")->delimiter(',');
  bench->add_option("--reps", ba.reps, "timed repetitions per point");
  bench->add_option("--warmup", ba.warmup, "untimed warmup passes");
  bench->add_option("--fixed-beta", ba.fixed_beta, "true, false, or both");
  bench->add_option("--seed", ba.seed, "sweep seed");
  bench->add_option("--threads", ba.threads, "thread budget for both models");
  bench->add_option("--out", ba.out, "report path (.csv or .json)");
  bench->add_option("--format", ba.format, "csv or json (default from extension)")
      ->check(CLI::IsMember({"csv", "json"}));
  bench->callback([&] { run_bench(ba); });

  std::string train_config;
  bool train_quiet = false;
  auto* tr = app.add_subcommand("train", "train a network from a JSON config");
  tr->add_option("--config", train_config, "run configuration (JSON)")->required();
  tr->add_flag("--quiet", train_quiet, "suppress per-epoch output");
  tr->callback([&] { run_train(train_config, train_quiet); });

  std::string eval_ckpt, eval_data;
  long long eval_batch = 256;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a spike dataset");
  ev->add_option("--ckpt", eval_ckpt, "checkpoint (.snnc)")->required();
  ev->add_option("--data", eval_data, "dataset (.snnt)")->required();
  ev->add_option("--batch", eval_batch, "evaluation batch size");
  ev->callback([&] { run_eval(eval_ckpt, eval_data, eval_batch); });

  auto* gen = app.add_subcommand("gen", "generate datasets");
  gen->require_subcommand(1);

  long long yy_n = 20000, yy_t = 100;
  std::uint64_t yy_seed = 7;
  std::string yy_out;
  auto* yy = gen->add_subcommand("yinyang", "three-class disk dataset, latency-coded");
  yy->add_option("--n", yy_n, "sample count");
  yy->add_option("--seed", yy_seed, "generator seed");
  yy->add_option("--t", yy_t, "encoding timesteps");
  yy->add_option("--out", yy_out, "output .snnt")->required();
  yy->callback([&] { run_gen_yinyang(yy_n, yy_seed, yy_t, yy_out); });

  long long sy_b = 128, sy_n = 100, sy_t = 128;
  std::string sy_rate = "0..200", sy_out;
  double sy_dt = 1.0;
  std::uint64_t sy_seed = 1;
  auto* sy = gen->add_subcommand("synth", "random-rate benchmark spikes");
  sy->add_option("--b", sy_b, "batch size");
  sy->add_option("--n", sy_n, "neurons");
  sy->add_option("--t", sy_t, "timesteps");
  sy->add_option("--rate", sy_rate, "firing rate in Hz, fixed or lo..hi");
  sy->add_option("--dt", sy_dt, "bin width in ms");
  sy->add_option("--seed", sy_seed, "generator seed");
  sy->add_option("--out", sy_out, "output .snnt")->required();
  sy->callback([&] { run_gen_synth(sy_b, sy_n, sy_t, sy_rate, sy_dt, sy_seed, sy_out); });

  auto* enc = app.add_subcommand("encode", "encode image data to spikes");
  enc->require_subcommand(1);

  std::string tt_idx, tt_labels, tt_out;
  long long tt_t = 100;
  auto* tt = enc->add_subcommand("ttfs", "time-to-first-spike encode an IDX image file");
  tt->add_option("--idx", tt_idx, "IDX image file")->required();
  tt->add_option("--labels", tt_labels, "IDX label file")->required();
  tt->add_option("--t", tt_t, "encoding timesteps");
  tt->add_option("--out", tt_out, "output .snnt")->required();
  tt->callback([&] { run_encode_ttfs(tt_idx, tt_labels, tt_t, tt_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const snnkit::SnnError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

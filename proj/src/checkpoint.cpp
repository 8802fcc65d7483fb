#include "snnkit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

#include <json.hpp>

namespace snnkit {

std::string backend_to_string(ConvBackend b) {
  switch (b) {
    case ConvBackend::Auto: return "auto";
    case ConvBackend::Direct: return "direct";
    case ConvBackend::Fft: return "fft";
  }
  return "auto";
}

ConvBackend backend_from_string(const std::string& s) {
  if (s == "auto") return ConvBackend::Auto;
  if (s == "direct") return ConvBackend::Direct;
  if (s == "fft") return ConvBackend::Fft;
  throw ParamError("unknown conv backend '" + s + "'");
}

namespace {

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 8);
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 4);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  write_u64(os, u);
}

void read_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  if (!is.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
    throw FormatError(std::string("checkpoint: truncated file reading ") + what);
}

std::uint64_t read_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  read_bytes(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  read_bytes(is, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is, const char* what) {
  const std::uint64_t u = read_u64(is, what);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

template <class S>
void write_tensor(std::ostream& os, const Tensor<S>& t) {
  write_u32(os, static_cast<std::uint32_t>(t.ndim()));
  for (index_t i = 0; i < t.ndim(); ++i) write_u64(os, static_cast<std::uint64_t>(t.dim(i)));
  for (index_t i = 0; i < t.numel(); ++i) write_f64(os, static_cast<double>(t(i)));
}

template <class S>
Tensor<S> read_tensor(std::istream& is, const char* what) {
  const std::uint32_t nd = read_u32(is, what);
  if (nd > 8) throw FormatError(std::string("checkpoint: implausible rank reading ") + what);
  std::vector<index_t> shape(nd);
  for (std::uint32_t i = 0; i < nd; ++i)
    shape[i] = static_cast<index_t>(read_u64(is, what));
  Tensor<S> t(shape);
  for (index_t i = 0; i < t.numel(); ++i) t(i) = static_cast<S>(read_f64(is, what));
  return t;
}

}  // namespace

std::string network_config_to_json(const NetworkConfig& cfg) {
  nlohmann::json j;
  j["sizes"] = cfg.sizes;
  j["variant"] = to_string(cfg.variant);
  j["t"] = cfg.T;
  j["dt"] = cfg.dt;
  j["surrogate_slope"] = cfg.surrogate_slope;
  j["readout"] = to_string(cfg.readout);
  j["trainable_beta"] = cfg.trainable_beta;
  j["seed"] = cfg.seed;
  j["init_gain"] = cfg.init_gain;
  j["zero_hidden_init"] = cfg.zero_hidden_init;
  j["tau_hidden"] = cfg.tau_hidden;
  j["tau_readout"] = cfg.tau_readout;
  j["backend"] = backend_to_string(cfg.backend);
  return j.dump(2);
}

NetworkConfig network_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  NetworkConfig cfg;
  try {
    if (!j.contains("sizes")) throw ConfigError("config: missing 'sizes'");
    cfg.sizes = j.at("sizes").get<std::vector<index_t>>();
    cfg.variant = model_variant_from_string(j.value("variant", to_string(cfg.variant)));
    cfg.T = j.value("t", cfg.T);
    cfg.dt = j.value("dt", cfg.dt);
    cfg.surrogate_slope = j.value("surrogate_slope", cfg.surrogate_slope);
    cfg.readout = readout_mode_from_string(j.value("readout", to_string(cfg.readout)));
    cfg.trainable_beta = j.value("trainable_beta", cfg.trainable_beta);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.init_gain = j.value("init_gain", cfg.init_gain);
    cfg.zero_hidden_init = j.value("zero_hidden_init", cfg.zero_hidden_init);
    cfg.tau_hidden = j.value("tau_hidden", cfg.tau_hidden);
    cfg.tau_readout = j.value("tau_readout", cfg.tau_readout);
    cfg.backend = backend_from_string(j.value("backend", backend_to_string(cfg.backend)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

template <class S>
void save_checkpoint(const std::string& path, const Network<S>& net, Adam<S>* adam,
                     index_t epoch, double best_loss) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("checkpoint: cannot write " + path);

  os.write("SNNC", 4);
  write_u32(os, 1);
  const std::string cfg_json = network_config_to_json(net.cfg);
  write_u64(os, cfg_json.size());
  write_bytes(os, cfg_json.data(), cfg_json.size());

  std::vector<std::pair<std::string, const Tensor<S>*>> params;
  const_cast<Network<S>&>(net).for_each_param(
      [&](const std::string& name, Tensor<S>& t) { params.emplace_back(name, &t); });
  write_u64(os, params.size());
  for (const auto& [name, t] : params) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    write_bytes(os, name.data(), name.size());
    write_tensor(os, *t);
  }

  const bool has_adam = adam != nullptr;
  write_u32(os, has_adam ? 1 : 0);
  if (has_adam) {
    if (adam->moments1().size() != params.size())
      throw StateError("checkpoint: optimizer slots do not match the parameter list");
    write_u64(os, static_cast<std::uint64_t>(adam->steps()));
    write_u64(os, params.size());
    for (const Tensor<S>& m : adam->moments1()) write_tensor(os, m);
    for (const Tensor<S>& v : adam->moments2()) write_tensor(os, v);
  }
  write_u64(os, static_cast<std::uint64_t>(epoch));
  write_f64(os, best_loss);
  if (!os) throw IoError("checkpoint: write failed for " + path);
}

template <class S>
Checkpoint<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "SNNC")
    throw FormatError("checkpoint: " + path + " has wrong magic, expected SNNC");
  const std::uint32_t version = read_u32(is, "version");
  if (version != 1)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));

  const std::uint64_t json_len = read_u64(is, "config length");
  std::string cfg_json(json_len, '\0');
  read_bytes(is, cfg_json.data(), json_len, "config");
  const NetworkConfig cfg = network_config_from_json(cfg_json);

  const std::uint64_t n_tensors = read_u64(is, "tensor count");
  std::vector<std::pair<std::string, Tensor<S>>> stored;
  stored.reserve(n_tensors);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = read_u32(is, "tensor name");
    std::string name(name_len, '\0');
    read_bytes(is, name.data(), name_len, "tensor name");
    stored.emplace_back(std::move(name), read_tensor<S>(is, "tensor payload"));
  }

  Checkpoint<S> ckpt;
  ckpt.net = init_network<S>(cfg);
  std::size_t expected = 0;
  ckpt.net.for_each_param([&](const std::string& name, Tensor<S>& t) {
    if (expected >= stored.size() || stored[expected].first != name)
      throw FormatError("checkpoint: missing tensor '" + name + "'");
    if (stored[expected].second.shape() != t.shape())
      throw FormatError("checkpoint: tensor '" + name + "' has shape " +
                        stored[expected].second.shape_str() + ", expected " + t.shape_str());
    t = std::move(stored[expected].second);
    ++expected;
  });
  if (expected != stored.size())
    throw FormatError("checkpoint: file holds " + std::to_string(stored.size()) +
                      " tensors, network needs " + std::to_string(expected));

  const std::uint32_t has_adam = read_u32(is, "optimizer flag");
  if (has_adam) {
    ckpt.adam_steps = static_cast<std::int64_t>(read_u64(is, "optimizer steps"));
    const std::uint64_t n_slots = read_u64(is, "optimizer slot count");
    if (n_slots != n_tensors)
      throw FormatError("checkpoint: optimizer slots do not match the parameter list");
    std::vector<Tensor<S>> m, v;
    for (std::uint64_t i = 0; i < n_slots; ++i)
      m.push_back(read_tensor<S>(is, "optimizer moment"));
    for (std::uint64_t i = 0; i < n_slots; ++i)
      v.push_back(read_tensor<S>(is, "optimizer moment"));
    ckpt.adam_m = std::move(m);
    ckpt.adam_v = std::move(v);
  }
  ckpt.epoch = static_cast<index_t>(read_u64(is, "epoch"));
  ckpt.best_loss = read_f64(is, "best loss");
  return ckpt;
}

template void save_checkpoint<float>(const std::string&, const Network<float>&, Adam<float>*,
                                     index_t, double);
template void save_checkpoint<double>(const std::string&, const Network<double>&, Adam<double>*,
                                      index_t, double);
template Checkpoint<float> load_checkpoint<float>(const std::string&);
template Checkpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace snnkit

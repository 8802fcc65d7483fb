#include "snnkit/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace snnkit {
namespace {

// Spike time for one intensity, or T for "no spike".
index_t ttfs_time(double v, double i_max, index_t t_steps) {
  const index_t ti =
      static_cast<index_t>(std::floor((i_max - v) / i_max * static_cast<double>(t_steps)));
  return ti < 0 ? 0 : ti;
}

void require_intensity(double v, double i_max, index_t sample, index_t feature) {
  if (!(v >= 0.0 && v <= i_max))
    throw EncodingError("ttfs: value " + std::to_string(v) + " outside [0, " +
                        std::to_string(i_max) + "] at sample " + std::to_string(sample) +
                        ", feature " + std::to_string(feature));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  static_assert(sizeof(u) == sizeof(v));
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(std::string("snnt: truncated file reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& is, const char* what) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2))
    throw FormatError(std::string("snnt: truncated file reading ") + what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

double read_f64(std::istream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw FormatError(std::string("snnt: truncated file reading ") + what);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

std::uint32_t read_u32_be(std::istream& is, const char* what, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError("idx: " + path + " truncated reading " + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

template <class S>
Tensor<S> gen_synthetic(index_t b, index_t n, index_t t, double dt_ms, double rate_lo_hz,
                        double rate_hi_hz, std::uint64_t seed) {
  if (b < 0 || n < 0 || t < 0) throw ParamError("gen_synthetic: negative extent");
  if (!(dt_ms > 0)) throw ParamError("gen_synthetic: dt must be positive");
  if (rate_lo_hz < 0 || rate_hi_hz < rate_lo_hz)
    throw ParamError("gen_synthetic: rate range must satisfy 0 <= lo <= hi");
  if (rate_hi_hz * dt_ms / 1000.0 > 1.0)
    throw ParamError("gen_synthetic: rate " + std::to_string(rate_hi_hz) + " Hz at dt " +
                     std::to_string(dt_ms) + " ms gives per-bin probability > 1");

  Rng rng(seed);
  Tensor<S> out({b, n, t});
  S* p = out.data();
  for (index_t bi = 0; bi < b; ++bi) {
    const double rate = rng.uniform(rate_lo_hz, rate_hi_hz);
    const double prob = rate * dt_ms / 1000.0;
    for (index_t i = 0; i < n * t; ++i) p[bi * n * t + i] = rng.bernoulli(prob) ? S(1) : S(0);
  }
  return out;
}

template <class S>
Tensor<S> ttfs_encode(const Tensor<float>& values, const TtfsEncoderCfg& cfg) {
  if (!(cfg.i_max > 0)) throw ParamError("ttfs: i_max must be positive");
  if (cfg.T < 1) throw ParamError("ttfs: T must be positive");
  require_ndim(values, 2, "ttfs input");
  const index_t n = values.dim(0), d = values.dim(1);
  Tensor<S> out({n, d, cfg.T});
  for (index_t i = 0; i < n; ++i) {
    for (index_t j = 0; j < d; ++j) {
      const double v = static_cast<double>(values(i, j));
      require_intensity(v, cfg.i_max, i, j);
      const index_t ti = ttfs_time(v, cfg.i_max, cfg.T);
      if (ti < cfg.T) out(i, j, ti) = S(1);
    }
  }
  return out;
}

int yinyang_label(double x, double y) {
  constexpr double kR = 0.5;
  const double dl = std::hypot(x - 0.25, y - 0.5);
  const double dr = std::hypot(x - 0.75, y - 0.5);
  if (dl < kR / 4 || dr < kR / 4) return 2;  // dot
  const bool yin = (y >= 0.5 && dr > kR / 2) || (y < 0.5 && dl <= kR / 2);
  return yin ? 0 : 1;
}

std::pair<Tensor<float>, std::vector<int>> gen_yinyang(index_t n_samples, std::uint64_t seed) {
  if (n_samples < 3) throw ParamError("gen_yinyang: need at least 3 samples");
  index_t quota[3];
  const index_t base = n_samples / 3, rem = n_samples % 3;
  for (int c = 0; c < 3; ++c) quota[c] = base + (c < rem ? 1 : 0);

  Rng rng(seed);
  Tensor<float> points({n_samples, 4});
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n_samples));
  index_t count[3] = {0, 0, 0};
  index_t filled = 0;
  while (filled < n_samples) {
    const double x = rng.uniform01();
    const double y = rng.uniform01();
    const double dx = x - 0.5, dy = y - 0.5;
    if (dx * dx + dy * dy > 0.25) continue;
    const int c = yinyang_label(x, y);
    if (count[c] >= quota[c]) continue;
    ++count[c];
    points(filled, 0) = static_cast<float>(x);
    points(filled, 1) = static_cast<float>(y);
    // complements of the stored (already rounded) coordinates
    points(filled, 2) = 1.0f - points(filled, 0);
    points(filled, 3) = 1.0f - points(filled, 1);
    labels.push_back(c);
    ++filled;
  }
  return {std::move(points), std::move(labels)};
}

std::pair<Tensor<float>, std::vector<int>> load_mnist_idx(const std::string& images_path,
                                                          const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw IoError("idx: cannot open " + images_path);
  const std::uint32_t img_magic = read_u32_be(imgs, "magic", images_path);
  if (img_magic != 0x00000803u) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "expected 0x00000803, got 0x%08x", img_magic);
    throw FormatError("idx: " + images_path + " has wrong magic: " + buf);
  }
  const std::uint32_t n = read_u32_be(imgs, "image count", images_path);
  const std::uint32_t rows = read_u32_be(imgs, "row count", images_path);
  const std::uint32_t cols = read_u32_be(imgs, "column count", images_path);
  if (rows != 28 || cols != 28)
    throw FormatError("idx: " + images_path + " has " + std::to_string(rows) + "x" +
                      std::to_string(cols) + " images, expected 28x28");

  const std::size_t pixel_bytes = static_cast<std::size_t>(n) * rows * cols;
  std::vector<unsigned char> pixels(pixel_bytes);
  if (!imgs.read(reinterpret_cast<char*>(pixels.data()),
                 static_cast<std::streamsize>(pixel_bytes)))
    throw FormatError("idx: " + images_path + " truncated: expected " +
                      std::to_string(pixel_bytes) + " pixel bytes");

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw IoError("idx: cannot open " + labels_path);
  const std::uint32_t lab_magic = read_u32_be(labs, "magic", labels_path);
  if (lab_magic != 0x00000801u) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "expected 0x00000801, got 0x%08x", lab_magic);
    throw FormatError("idx: " + labels_path + " has wrong magic: " + buf);
  }
  const std::uint32_t n_lab = read_u32_be(labs, "label count", labels_path);
  if (n_lab != n)
    throw FormatError("idx: " + std::to_string(n) + " images but " + std::to_string(n_lab) +
                      " labels");
  std::vector<unsigned char> raw_labels(n_lab);
  if (!labs.read(reinterpret_cast<char*>(raw_labels.data()),
                 static_cast<std::streamsize>(n_lab)))
    throw FormatError("idx: " + labels_path + " truncated: expected " + std::to_string(n_lab) +
                      " label bytes");

  Tensor<float> values({static_cast<index_t>(n), 784});
  for (std::size_t i = 0; i < pixel_bytes; ++i)
    values(static_cast<index_t>(i)) = static_cast<float>(pixels[i]) / 255.0f;
  std::vector<int> labels(raw_labels.begin(), raw_labels.end());
  return {std::move(values), std::move(labels)};
}

void save_spikes(const std::string& path, const SnntData& data) {
  require_ndim(data.spikes, 3, "snnt spikes");
  require_binary(data.spikes, "snnt spikes");
  const index_t b = data.spikes.dim(0), n = data.spikes.dim(1), t = data.spikes.dim(2);
  if (!data.labels.empty() && static_cast<index_t>(data.labels.size()) != b)
    throw FormatError("snnt: " + std::to_string(data.labels.size()) + " labels for " +
                      std::to_string(b) + " samples");

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("snnt: cannot write " + path);
  os.write("SNNT", 4);
  write_u32(os, 1);
  write_u32(os, static_cast<std::uint32_t>(b));
  write_u32(os, static_cast<std::uint32_t>(n));
  write_u32(os, static_cast<std::uint32_t>(t));
  write_f64(os, data.dt_ms);
  write_u32(os, static_cast<std::uint32_t>(data.labels.size()));
  for (std::uint16_t l : data.labels) write_u16(os, l);

  const index_t stride = (t + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(stride));
  for (index_t r = 0; r < b * n; ++r) {
    std::fill(row.begin(), row.end(), 0);
    const float* src = data.spikes.data() + r * t;
    for (index_t u = 0; u < t; ++u)
      if (src[u] == 1.0f) row[static_cast<std::size_t>(u / 8)] |= 1u << (u % 8);
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(stride));
  }
  if (!os) throw IoError("snnt: write failed for " + path);
}

SnntData load_spikes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("snnt: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "SNNT")
    throw FormatError("snnt: " + path + " has wrong magic, expected SNNT");
  const std::uint32_t version = read_u32(is, "version");
  if (version != 1)
    throw FormatError("snnt: unsupported version " + std::to_string(version));
  const index_t b = read_u32(is, "batch extent");
  const index_t n = read_u32(is, "neuron extent");
  const index_t t = read_u32(is, "time extent");
  SnntData data;
  data.dt_ms = read_f64(is, "dt");
  const std::uint32_t n_labels = read_u32(is, "label count");
  if (n_labels != 0 && static_cast<index_t>(n_labels) != b)
    throw FormatError("snnt: " + std::to_string(n_labels) + " labels for " + std::to_string(b) +
                      " samples");
  data.labels.resize(n_labels);
  for (std::uint32_t i = 0; i < n_labels; ++i) data.labels[i] = read_u16(is, "label");

  data.spikes = Tensor<float>({b, n, t});
  const index_t stride = (t + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(stride));
  for (index_t r = 0; r < b * n; ++r) {
    if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride))) {
      const index_t expected = b * n * stride;
      const index_t got = r * stride + is.gcount();
      throw FormatError("snnt: truncated spike payload: expected " + std::to_string(expected) +
                        " bytes, got " + std::to_string(got));
    }
    float* dst = data.spikes.data() + r * t;
    for (index_t u = 0; u < t; ++u)
      dst[u] = (row[static_cast<std::size_t>(u / 8)] >> (u % 8)) & 1u ? 1.0f : 0.0f;
  }
  return data;
}

template <class S>
MaterializedDataset<S>::MaterializedDataset(Tensor<S> spikes, std::vector<int> labels,
                                            int classes)
    : spikes_(std::move(spikes)), labels_(std::move(labels)), classes_(classes) {
  require_ndim(spikes_, 3, "dataset spikes");
  require_binary(spikes_, "dataset spikes");
  if (static_cast<index_t>(labels_.size()) != spikes_.dim(0))
    throw ShapeError("dataset: " + std::to_string(labels_.size()) + " labels for " +
                     std::to_string(spikes_.dim(0)) + " samples");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] < 0 || labels_[i] >= classes_)
      throw LabelError("dataset: label " + std::to_string(labels_[i]) + " outside [0," +
                       std::to_string(classes_) + ") at sample " + std::to_string(i));
}

template <class S>
void MaterializedDataset<S>::fetch(const index_t* idx, index_t count, index_t T,
                                   Tensor<S>& spikes, std::vector<int>& labels) const {
  if (T != spikes_.dim(2))
    throw ParamError("dataset: provides T=" + std::to_string(spikes_.dim(2)) + ", requested " +
                     std::to_string(T));
  const index_t n = spikes_.dim(1);
  if (spikes.shape() != std::vector<index_t>{count, n, T}) spikes = Tensor<S>({count, n, T});
  labels.resize(static_cast<std::size_t>(count));
  for (index_t i = 0; i < count; ++i) {
    const index_t s = idx[i];
    if (s < 0 || s >= spikes_.dim(0))
      throw ParamError("dataset: sample index " + std::to_string(s) + " out of range");
    std::copy(spikes_.data() + s * n * T, spikes_.data() + (s + 1) * n * T,
              spikes.data() + i * n * T);
    labels[static_cast<std::size_t>(i)] = labels_[static_cast<std::size_t>(s)];
  }
}

template <class S>
TtfsDataset<S>::TtfsDataset(Tensor<float> values, std::vector<int> labels, int classes,
                            double i_max)
    : values_(std::move(values)), labels_(std::move(labels)), classes_(classes), i_max_(i_max) {
  require_ndim(values_, 2, "dataset values");
  if (!(i_max_ > 0)) throw ParamError("dataset: i_max must be positive");
  if (static_cast<index_t>(labels_.size()) != values_.dim(0))
    throw ShapeError("dataset: " + std::to_string(labels_.size()) + " labels for " +
                     std::to_string(values_.dim(0)) + " samples");
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] < 0 || labels_[i] >= classes_)
      throw LabelError("dataset: label " + std::to_string(labels_[i]) + " outside [0," +
                       std::to_string(classes_) + ") at sample " + std::to_string(i));
}

template <class S>
void TtfsDataset<S>::fetch(const index_t* idx, index_t count, index_t T, Tensor<S>& spikes,
                           std::vector<int>& labels) const {
  if (T < 1) throw ParamError("dataset: T must be positive");
  const index_t d = values_.dim(1);
  if (spikes.shape() != std::vector<index_t>{count, d, T}) spikes = Tensor<S>({count, d, T});
  spikes.fill(S(0));
  labels.resize(static_cast<std::size_t>(count));
  for (index_t i = 0; i < count; ++i) {
    const index_t s = idx[i];
    if (s < 0 || s >= values_.dim(0))
      throw ParamError("dataset: sample index " + std::to_string(s) + " out of range");
    for (index_t j = 0; j < d; ++j) {
      const double v = static_cast<double>(values_(s, j));
      require_intensity(v, i_max_, s, j);
      const index_t ti = ttfs_time(v, i_max_, T);
      if (ti < T) spikes(i, j, ti) = S(1);
    }
    labels[static_cast<std::size_t>(i)] = labels_[static_cast<std::size_t>(s)];
  }
}

template Tensor<float> gen_synthetic<float>(index_t, index_t, index_t, double, double, double,
                                            std::uint64_t);
template Tensor<double> gen_synthetic<double>(index_t, index_t, index_t, double, double, double,
                                              std::uint64_t);
template Tensor<float> ttfs_encode<float>(const Tensor<float>&, const TtfsEncoderCfg&);
template Tensor<double> ttfs_encode<double>(const Tensor<float>&, const TtfsEncoderCfg&);
template class MaterializedDataset<float>;
template class MaterializedDataset<double>;
template class TtfsDataset<float>;
template class TtfsDataset<double>;

}  // namespace snnkit

#include "fft_conv.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <utility>
#include <vector>

namespace snnkit::detail {
namespace {

constexpr index_t kChunk = 64;

template <class S>
struct Api;

template <>
struct Api<double> {
  using Plan = fftw_plan;
  static double* alloc_real(size_t n) { return fftw_alloc_real(n); }
  static double* alloc_cpx(size_t n) { return reinterpret_cast<double*>(fftw_alloc_complex(n)); }
  static Plan plan_r2c(int l, double* in, double* out) {
    int dims[1] = {l};
    return fftw_plan_many_dft_r2c(1, dims, static_cast<int>(kChunk), in, nullptr, 1, l,
                                  reinterpret_cast<fftw_complex*>(out), nullptr, 1, l / 2 + 1,
                                  FFTW_ESTIMATE);
  }
  static Plan plan_c2r(int l, double* in, double* out) {
    int dims[1] = {l};
    return fftw_plan_many_dft_c2r(1, dims, static_cast<int>(kChunk),
                                  reinterpret_cast<fftw_complex*>(in), nullptr, 1, l / 2 + 1, out,
                                  nullptr, 1, l, FFTW_ESTIMATE);
  }
  static void execute(Plan p) { fftw_execute(p); }
};

template <>
struct Api<float> {
  using Plan = fftwf_plan;
  static float* alloc_real(size_t n) { return fftwf_alloc_real(n); }
  static float* alloc_cpx(size_t n) { return reinterpret_cast<float*>(fftwf_alloc_complex(n)); }
  static Plan plan_r2c(int l, float* in, float* out) {
    int dims[1] = {l};
    return fftwf_plan_many_dft_r2c(1, dims, static_cast<int>(kChunk), in, nullptr, 1, l,
                                   reinterpret_cast<fftwf_complex*>(out), nullptr, 1, l / 2 + 1,
                                   FFTW_ESTIMATE);
  }
  static Plan plan_c2r(int l, float* in, float* out) {
    int dims[1] = {l};
    return fftwf_plan_many_dft_c2r(1, dims, static_cast<int>(kChunk),
                                   reinterpret_cast<fftwf_complex*>(in), nullptr, 1, l / 2 + 1, out,
                                   nullptr, 1, l, FFTW_ESTIMATE);
  }
  static void execute(Plan p) { fftwf_execute(p); }
};

// One reusable transform workspace per (scalar, padded length): chunk-sized
// real/complex buffers and the forward/backward plans bound to them.
template <class S>
struct Slot {
  index_t l = 0;
  index_t nc = 0;
  S* real = nullptr;  // kChunk x l
  S* cpx = nullptr;   // kChunk x nc, interleaved re/im
  typename Api<S>::Plan fwd{};
  typename Api<S>::Plan bwd{};
};

template <class S>
Slot<S>& slot_for(index_t l) {
  static std::map<index_t, Slot<S>> cache;
  auto it = cache.find(l);
  if (it == cache.end()) {
    Slot<S> s;
    s.l = l;
    s.nc = l / 2 + 1;
    s.real = Api<S>::alloc_real(static_cast<size_t>(kChunk * l));
    s.cpx = Api<S>::alloc_cpx(static_cast<size_t>(kChunk * s.nc));
    std::memset(s.real, 0, sizeof(S) * static_cast<size_t>(kChunk * l));
    std::memset(s.cpx, 0, sizeof(S) * static_cast<size_t>(kChunk * s.nc * 2));
    s.fwd = Api<S>::plan_r2c(static_cast<int>(l), s.real, s.cpx);
    s.bwd = Api<S>::plan_c2r(static_cast<int>(l), s.cpx, s.real);
    it = cache.emplace(l, s).first;
  }
  return it->second;
}

index_t padded_length(index_t t) {
  index_t l = 1;
  while (l < 2 * t) l *= 2;
  return l;
}

// Copies one row of length t into the slot's real buffer, zeroing the padding.
// Rows beyond the chunk's live count are left stale; their transforms are
// never read.
template <class S, class T>
inline void load_row(T* dst, const S* src, index_t t, index_t l) {
  if constexpr (std::is_same_v<S, T>) {
    std::memcpy(dst, src, sizeof(S) * static_cast<size_t>(t));
  } else {
    for (index_t i = 0; i < t; ++i) dst[i] = static_cast<T>(src[i]);
  }
  std::memset(dst + t, 0, sizeof(T) * static_cast<size_t>(l - t));
}

// dst = a * b (complex, interleaved)
template <class S>
inline void cmul(const S* a, const S* b, S* dst, index_t nc) {
  for (index_t i = 0; i < nc; ++i) {
    const S ar = a[2 * i], ai = a[2 * i + 1];
    const S br = b[2 * i], bi = b[2 * i + 1];
    dst[2 * i] = ar * br - ai * bi;
    dst[2 * i + 1] = ar * bi + ai * br;
  }
}

// dst = a * conj(b)
template <class S>
inline void cmul_conj(const S* a, const S* b, S* dst, index_t nc) {
  for (index_t i = 0; i < nc; ++i) {
    const S ar = a[2 * i], ai = a[2 * i + 1];
    const S br = b[2 * i], bi = b[2 * i + 1];
    dst[2 * i] = ar * br + ai * bi;
    dst[2 * i + 1] = ai * br - ar * bi;
  }
}

// dst += a * conj(b)
template <class S>
inline void cmul_conj_acc(const S* a, const S* b, S* dst, index_t nc) {
  for (index_t i = 0; i < nc; ++i) {
    const S ar = a[2 * i], ai = a[2 * i + 1];
    const S br = b[2 * i], bi = b[2 * i + 1];
    dst[2 * i] += ar * br + ai * bi;
    dst[2 * i + 1] += ai * br - ar * bi;
  }
}

// Transforms the nk rows of k (each of length t, zero-padded to slot.l) and
// stores the spectra contiguously in out (nk x nc, interleaved), scaled by
// `scale` (folding in the inverse-transform normalization saves a pass over
// the much larger data rows).
template <class S>
void kernel_spectra(Slot<S>& slot, const S* k, index_t nk, index_t t, S scale,
                    std::vector<S>& out) {
  out.resize(static_cast<size_t>(nk * slot.nc * 2));
  for (index_t base = 0; base < nk; base += kChunk) {
    const index_t cnt = std::min(kChunk, nk - base);
    for (index_t r = 0; r < cnt; ++r)
      load_row(slot.real + r * slot.l, k + (base + r) * t, t, slot.l);
    Api<S>::execute(slot.fwd);
    S* dst = out.data() + base * slot.nc * 2;
    const S* src = slot.cpx;
    for (index_t i = 0; i < cnt * slot.nc * 2; ++i) dst[i] = src[i] * scale;
  }
}

enum class MulMode { Conv, Corr };

template <class S>
void rows_transform(const S* x, index_t rows, index_t T, const S* k, index_t nk, S* out,
                    MulMode mode) {
  Slot<S>& slot = slot_for<S>(padded_length(T));
  std::vector<S> kspec;
  kernel_spectra(slot, k, nk, T, S(1) / static_cast<S>(slot.l), kspec);
  for (index_t base = 0; base < rows; base += kChunk) {
    const index_t cnt = std::min(kChunk, rows - base);
    for (index_t r = 0; r < cnt; ++r)
      load_row(slot.real + r * slot.l, x + (base + r) * T, T, slot.l);
    Api<S>::execute(slot.fwd);
    for (index_t r = 0; r < cnt; ++r) {
      S* row = slot.cpx + r * slot.nc * 2;
      const S* ks = kspec.data() + ((base + r) % nk) * slot.nc * 2;
      if (mode == MulMode::Conv)
        cmul(row, ks, row, slot.nc);
      else
        cmul_conj(row, ks, row, slot.nc);
    }
    Api<S>::execute(slot.bwd);
    for (index_t r = 0; r < cnt; ++r)
      std::memcpy(out + (base + r) * T, slot.real + r * slot.l,
                  sizeof(S) * static_cast<size_t>(T));
  }
}

}  // namespace

template <class S>
void conv_rows_fft(const S* x, index_t rows, index_t T, const S* k, index_t nk, S* out) {
  rows_transform(x, rows, T, k, nk, out, MulMode::Conv);
}

template <class S>
void corr_rows_fft(const S* g, index_t rows, index_t T, const S* k, index_t nk, S* out) {
  rows_transform(g, rows, T, k, nk, out, MulMode::Corr);
}

template <class S>
void conv_backward_fft(const S* g, const S* x, index_t rows, index_t T, const S* k, index_t nk,
                       S* grad_in, S* grad_k) {
  Slot<S>& slot = slot_for<S>(padded_length(T));
  const index_t nc = slot.nc;
  const S inv_l = S(1) / static_cast<S>(slot.l);

  std::vector<S> kspec;
  if (grad_in) kernel_spectra(slot, k, nk, T, inv_l, kspec);
  std::vector<S> acc;
  if (grad_k) acc.assign(static_cast<size_t>(nk * nc * 2), S(0));

  std::vector<S> gspec(static_cast<size_t>(kChunk * nc * 2));
  for (index_t base = 0; base < rows; base += kChunk) {
    const index_t cnt = std::min(kChunk, rows - base);
    for (index_t r = 0; r < cnt; ++r)
      load_row(slot.real + r * slot.l, g + (base + r) * T, T, slot.l);
    Api<S>::execute(slot.fwd);
    std::memcpy(gspec.data(), slot.cpx, sizeof(S) * static_cast<size_t>(cnt * nc * 2));

    if (grad_k) {
      for (index_t r = 0; r < cnt; ++r)
        load_row(slot.real + r * slot.l, x + (base + r) * T, T, slot.l);
      Api<S>::execute(slot.fwd);
      for (index_t r = 0; r < cnt; ++r)
        cmul_conj_acc(gspec.data() + r * nc * 2, slot.cpx + r * nc * 2,
                      acc.data() + ((base + r) % nk) * nc * 2, nc);
    }

    if (grad_in) {
      for (index_t r = 0; r < cnt; ++r)
        cmul_conj(gspec.data() + r * nc * 2, kspec.data() + ((base + r) % nk) * nc * 2,
                  slot.cpx + r * nc * 2, nc);
      Api<S>::execute(slot.bwd);
      for (index_t r = 0; r < cnt; ++r)
        std::memcpy(grad_in + (base + r) * T, slot.real + r * slot.l,
                    sizeof(S) * static_cast<size_t>(T));
    }
  }

  if (grad_k) {
    for (index_t base = 0; base < nk; base += kChunk) {
      const index_t cnt = std::min(kChunk, nk - base);
      std::memcpy(slot.cpx, acc.data() + base * nc * 2,
                  sizeof(S) * static_cast<size_t>(cnt * nc * 2));
      Api<S>::execute(slot.bwd);
      for (index_t r = 0; r < cnt; ++r) {
        const S* src = slot.real + r * slot.l;
        S* dst = grad_k + (base + r) * T;
        for (index_t t = 0; t < T; ++t) dst[t] = src[t] * inv_l;
      }
    }
  }
}

namespace {

// Spectrum of the ramp kernel [1..t] zero-padded to l, pre-scaled by 1/l and
// cached per (l, t).
const std::vector<double>& ramp_spectrum(Slot<double>& slot, index_t t) {
  static std::map<std::pair<index_t, index_t>, std::vector<double>> cache;
  auto key = std::make_pair(slot.l, t);
  auto it = cache.find(key);
  if (it == cache.end()) {
    std::vector<double> ramp(static_cast<size_t>(t));
    for (index_t j = 0; j < t; ++j) ramp[static_cast<size_t>(j)] = static_cast<double>(j + 1);
    std::vector<double> spec;
    kernel_spectra(slot, ramp.data(), 1, t, 1.0 / static_cast<double>(slot.l), spec);
    it = cache.emplace(key, std::move(spec)).first;
  }
  return it->second;
}

}  // namespace

template <class S>
void ramp_conv_rows_exact(const S* x, index_t rows, index_t T, bool apply_step, S* raw_out,
                          S* latent_out, S* first_out) {
  Slot<double>& slot = slot_for<double>(padded_length(T));
  const std::vector<double>& rspec = ramp_spectrum(slot, T);
  for (index_t base = 0; base < rows; base += kChunk) {
    const index_t cnt = std::min(kChunk, rows - base);
    for (index_t r = 0; r < cnt; ++r) {
      const S* src = x + (base + r) * T;
      double* dst = slot.real + r * slot.l;
      if (apply_step) {
        S* raw = raw_out ? raw_out + (base + r) * T : nullptr;
        for (index_t t = 0; t < T; ++t) {
          const double s = src[t] > S(1) ? 1.0 : 0.0;
          dst[t] = s;
          if (raw) raw[t] = static_cast<S>(s);
        }
      } else {
        for (index_t t = 0; t < T; ++t) dst[t] = static_cast<double>(src[t]);
      }
      std::memset(dst + T, 0, sizeof(double) * static_cast<size_t>(slot.l - T));
    }
    Api<double>::execute(slot.fwd);
    for (index_t r = 0; r < cnt; ++r)
      cmul(slot.cpx + r * slot.nc * 2, rspec.data(), slot.cpx + r * slot.nc * 2, slot.nc);
    Api<double>::execute(slot.bwd);
    for (index_t r = 0; r < cnt; ++r) {
      const double* src = slot.real + r * slot.l;
      S* latent = latent_out ? latent_out + (base + r) * T : nullptr;
      S* first = first_out ? first_out + (base + r) * T : nullptr;
      for (index_t t = 0; t < T; ++t) {
        const long long z = std::llround(src[t]);
        if (latent) latent[t] = static_cast<S>(z);
        if (first) first[t] = (z == 1) ? S(1) : S(0);
      }
    }
  }
}

template void conv_rows_fft<float>(const float*, index_t, index_t, const float*, index_t, float*);
template void conv_rows_fft<double>(const double*, index_t, index_t, const double*, index_t,
                                    double*);
template void corr_rows_fft<float>(const float*, index_t, index_t, const float*, index_t, float*);
template void corr_rows_fft<double>(const double*, index_t, index_t, const double*, index_t,
                                    double*);
template void conv_backward_fft<float>(const float*, const float*, index_t, index_t, const float*,
                                       index_t, float*, float*);
template void conv_backward_fft<double>(const double*, const double*, index_t, index_t,
                                        const double*, index_t, double*, double*);
template void ramp_conv_rows_exact<float>(const float*, index_t, index_t, bool, float*, float*,
                                          float*);
template void ramp_conv_rows_exact<double>(const double*, index_t, index_t, bool, double*,
                                           double*, double*);

}  // namespace snnkit::detail

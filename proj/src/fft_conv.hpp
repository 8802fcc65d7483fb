#pragma once

#include "snnkit/tensor.hpp"

// FFT-backed causal convolution kernels on row-major [rows, T] data. The
// kernel row for data row r is r % nk. All transforms use cached plans on
// fixed chunk buffers; plan selection is deterministic (FFTW_ESTIMATE).
namespace snnkit::detail {

// out[r, t] = sum_{j<=t} k[r % nk, j] * x[r, t-j]
template <class S>
void conv_rows_fft(const S* x, index_t rows, index_t T, const S* k, index_t nk, S* out);

// out[r, t] = sum_{j < T-t} g[r, t+j] * k[r % nk, j]   (adjoint of conv_rows)
template <class S>
void corr_rows_fft(const S* g, index_t rows, index_t T, const S* k, index_t nk, S* out);

// Fused adjoints sharing the spectra of g:
//   grad_in (may be null): corr_rows(g, k)
//   grad_k  (may be null): grad_k[n, j] = sum_{r : r%nk==n} sum_t g[r,t] * x[r,t-j]
template <class S>
void conv_backward_fft(const S* g, const S* x, index_t rows, index_t T, const S* k,
                       index_t nk, S* grad_in, S* grad_k);

// Causal convolution with the ramp kernel [1, 2, ..., T], computed in double
// precision and rounded to the (provably integer) exact result. Optionally
// applies the strict threshold step to the input rows first and/or reduces the
// output to the z == 1 indicator.
//   apply_step: input rows are potentials; convolve step(v > 1) instead of v
//   raw_out:    when non-null, receives step(v) (only sensible with apply_step)
//   latent_out: when non-null, receives the rounded convolution z
//   first_out:  when non-null, receives (z == 1) ? 1 : 0
template <class S>
void ramp_conv_rows_exact(const S* x, index_t rows, index_t T, bool apply_step,
                          S* raw_out, S* latent_out, S* first_out);

}  // namespace snnkit::detail

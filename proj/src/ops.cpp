#include "snnkit/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "fft_conv.hpp"

namespace snnkit {
namespace {

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using CVecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

bool use_direct(index_t t, ConvBackend backend) {
  if (backend == ConvBackend::Direct) return true;
  if (backend == ConvBackend::Fft) return false;
  return t < kDirectConvMaxT;
}

// Index of the last nonzero kernel tap plus one; zero tails are skipped by
// the direct path (decay kernels underflow well before T at large T).
template <class S>
index_t effective_taps(const S* k, index_t t) {
  index_t n = t;
  while (n > 0 && k[n - 1] == S(0)) --n;
  return n;
}

template <class S>
void conv_shapes(const Tensor<S>& in, const Tensor<S>& kernel) {
  require_ndim(in, 3, "causal_conv input");
  require_ndim(kernel, 2, "causal_conv kernel");
  if (kernel.dim(0) != in.dim(1) || kernel.dim(1) != in.dim(2))
    throw ShapeError("causal_conv: kernel " + kernel.shape_str() + " does not match input " +
                     in.shape_str());
}

}  // namespace

template <class S>
Tensor<S> affine_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& bias) {
  require_ndim(in, 3, "affine input");
  require_ndim(w, 2, "affine weight");
  require_ndim(bias, 1, "affine bias");
  const index_t b = in.dim(0), n_in = in.dim(1), t = in.dim(2);
  const index_t n_out = w.dim(0);
  if (w.dim(1) != n_in)
    throw ShapeError("affine: weight " + w.shape_str() + " does not match input " +
                     in.shape_str());
  require_shape(bias, {n_out}, "affine bias");

  Tensor<S> out({b, n_out, t});
  CMatMap<S> wm(w.data(), n_out, n_in);
  CVecMap<S> bv(bias.data(), n_out);
  for (index_t i = 0; i < b; ++i) {
    CMatMap<S> x(in.data() + i * n_in * t, n_in, t);
    MatMap<S> y(out.data() + i * n_out * t, n_out, t);
    y.noalias() = wm * x;
    y.colwise() += bv;
  }
  return out;
}

template <class S>
void affine_backward(const Tensor<S>& grad_out, const Tensor<S>& in, const Tensor<S>& w,
                     Tensor<S>* grad_in, Tensor<S>& grad_w, Tensor<S>& grad_bias) {
  require_ndim(in, 3, "affine input");
  require_ndim(w, 2, "affine weight");
  const index_t b = in.dim(0), n_in = in.dim(1), t = in.dim(2);
  const index_t n_out = w.dim(0);
  require_shape(grad_out, {b, n_out, t}, "affine grad_out");
  if (w.dim(1) != n_in)
    throw ShapeError("affine: weight " + w.shape_str() + " does not match input " +
                     in.shape_str());

  if (!grad_w.same_shape(w)) grad_w = Tensor<S>({n_out, n_in});
  if (grad_bias.shape() != std::vector<index_t>{n_out}) grad_bias = Tensor<S>({n_out});
  grad_w.fill(S(0));
  grad_bias.fill(S(0));
  if (grad_in) {
    if (!grad_in->same_shape(in)) *grad_in = Tensor<S>({b, n_in, t});
  }

  CMatMap<S> wm(w.data(), n_out, n_in);
  MatMap<S> gw(grad_w.data(), n_out, n_in);
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gb(grad_bias.data(), n_out);
  for (index_t i = 0; i < b; ++i) {
    CMatMap<S> x(in.data() + i * n_in * t, n_in, t);
    CMatMap<S> gy(grad_out.data() + i * n_out * t, n_out, t);
    gw.noalias() += gy * x.transpose();
    gb.noalias() += gy.rowwise().sum();
    if (grad_in) {
      MatMap<S> gx(grad_in->data() + i * n_in * t, n_in, t);
      gx.noalias() = wm.transpose() * gy;
    }
  }
}

template <class S>
Tensor<S> causal_conv(const Tensor<S>& in, const Tensor<S>& kernel, ConvBackend backend) {
  conv_shapes(in, kernel);
  const index_t b = in.dim(0), n = in.dim(1), t = in.dim(2);
  Tensor<S> out(in.shape());
  if (in.empty()) return out;

  if (use_direct(t, backend)) {
    for (index_t r = 0; r < b * n; ++r) {
      const S* k = kernel.data() + (r % n) * t;
      const S* x = in.data() + r * t;
      S* y = out.data() + r * t;
      const index_t taps = effective_taps(k, t);
      for (index_t j = 0; j < taps; ++j) {
        const S kj = k[j];
        if (kj == S(0)) continue;
        for (index_t u = j; u < t; ++u) y[u] += kj * x[u - j];
      }
    }
  } else {
    detail::conv_rows_fft(in.data(), b * n, t, kernel.data(), n, out.data());
  }
  return out;
}

template <class S>
void causal_conv_backward(const Tensor<S>& grad_out, const Tensor<S>& in, const Tensor<S>& kernel,
                          Tensor<S>& grad_in, Tensor<S>& grad_kernel, ConvBackend backend) {
  conv_shapes(in, kernel);
  require_same_shape(grad_out, in, "causal_conv grad_out");
  const index_t b = in.dim(0), n = in.dim(1), t = in.dim(2);
  if (!grad_in.same_shape(in)) grad_in = Tensor<S>(in.shape());
  if (!grad_kernel.same_shape(kernel)) grad_kernel = Tensor<S>(kernel.shape());
  if (in.empty()) {
    grad_kernel.fill(S(0));
    return;
  }

  if (use_direct(t, backend)) {
    grad_in.fill(S(0));
    grad_kernel.fill(S(0));
    for (index_t r = 0; r < b * n; ++r) {
      const S* k = kernel.data() + (r % n) * t;
      const S* g = grad_out.data() + r * t;
      const S* x = in.data() + r * t;
      S* gx = grad_in.data() + r * t;
      S* gk = grad_kernel.data() + (r % n) * t;
      for (index_t j = 0; j < t; ++j) {
        const S kj = k[j];
        if (kj != S(0))
          for (index_t u = 0; u < t - j; ++u) gx[u] += kj * g[u + j];
        S acc = S(0);
        for (index_t u = j; u < t; ++u) acc += g[u] * x[u - j];
        gk[j] += acc;
      }
    }
  } else {
    detail::conv_backward_fft(grad_out.data(), in.data(), b * n, t, kernel.data(), n,
                              grad_in.data(), grad_kernel.data());
  }
}

double finite_diff_check(const std::function<double(const std::vector<double>&)>& fn,
                         std::vector<double> point, const std::vector<double>& analytic,
                         double step) {
  if (point.size() != analytic.size())
    throw ShapeError("finite_diff_check: point and analytic gradient sizes differ");
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + step;
    const double hi = fn(point);
    point[i] = saved - step;
    const double lo = fn(point);
    point[i] = saved;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw NumericError("finite_diff_check: function returned a non-finite value");
    const double central = (hi - lo) / (2.0 * step);
    const double err =
        std::abs(analytic[i] - central) / (std::abs(analytic[i]) + std::abs(central) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

template Tensor<float> affine_forward<float>(const Tensor<float>&, const Tensor<float>&,
                                             const Tensor<float>&);
template Tensor<double> affine_forward<double>(const Tensor<double>&, const Tensor<double>&,
                                               const Tensor<double>&);
template void affine_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&, Tensor<float>*, Tensor<float>&,
                                     Tensor<float>&);
template void affine_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>&, Tensor<double>*, Tensor<double>&,
                                      Tensor<double>&);
template Tensor<float> causal_conv<float>(const Tensor<float>&, const Tensor<float>&, ConvBackend);
template Tensor<double> causal_conv<double>(const Tensor<double>&, const Tensor<double>&,
                                            ConvBackend);
template void causal_conv_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                          const Tensor<float>&, Tensor<float>&, Tensor<float>&,
                                          ConvBackend);
template void causal_conv_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                           const Tensor<double>&, Tensor<double>&, Tensor<double>&,
                                           ConvBackend);

}  // namespace snnkit

#pragma once

#include <functional>
#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

enum class ConvBackend { Auto, Direct, Fft };

// Auto picks the direct O(T^2) path below this length and the FFT path above.
constexpr index_t kDirectConvMaxT = 64;

// out[b,i,t] = bias[i] + sum_j w[i,j] * in[b,j,t]
template <class S>
Tensor<S> affine_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& bias);

// Adjoint of affine_forward. grad_in may be null when the input needs no
// gradient (e.g. the first layer). Outputs are overwritten, not accumulated.
template <class S>
void affine_backward(const Tensor<S>& grad_out, const Tensor<S>& in, const Tensor<S>& w,
                     Tensor<S>* grad_in, Tensor<S>& grad_w, Tensor<S>& grad_bias);

// Depthwise causal convolution: out[b,n,t] = sum_{j=0..t} kernel[n,j] * in[b,n,t-j].
template <class S>
Tensor<S> causal_conv(const Tensor<S>& in, const Tensor<S>& kernel,
                      ConvBackend backend = ConvBackend::Auto);

// grad_in[b,n,t] = sum_{j} grad_out[b,n,t+j] * kernel[n,j]   (causal correlation)
// grad_kernel[n,j] = sum_{b,t} grad_out[b,n,t] * in[b,n,t-j]
template <class S>
void causal_conv_backward(const Tensor<S>& grad_out, const Tensor<S>& in,
                          const Tensor<S>& kernel, Tensor<S>& grad_in,
                          Tensor<S>& grad_kernel, ConvBackend backend = ConvBackend::Auto);

// Max relative error between an analytic gradient and central finite
// differences of fn at point. fn must be smooth on the evaluated path.
double finite_diff_check(const std::function<double(const std::vector<double>&)>& fn,
                         std::vector<double> point, const std::vector<double>& analytic,
                         double step = 1e-5);

}  // namespace snnkit

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "snnkit/errors.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// Adam with bias correction. Slot order is fixed by the caller's parameter
// ordering, which keeps updates bit-reproducible.
template <class S>
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : b1_(beta1), b2_(beta2), eps_(eps) {}

  void attach(const std::vector<Tensor<S>*>& params) {
    m_.clear();
    v_.clear();
    for (const Tensor<S>* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
    t_ = 0;
  }

  std::int64_t steps() const { return t_; }

  void step(const std::vector<Tensor<S>*>& params,
            const std::vector<const Tensor<S>*>& grads, double lr) {
    if (params.size() != m_.size() || grads.size() != params.size())
      throw StateError("adam: slot count mismatch; call attach first");
    for (std::size_t k = 0; k < grads.size(); ++k)
      if (!all_finite(*grads[k]))
        throw NumericError("adam: non-finite gradient in slot " + std::to_string(k) +
                           ", step aborted");
    ++t_;
    double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      S* p = params[k]->data();
      const S* g = grads[k]->data();
      S* m = m_[k].data();
      S* v = v_[k].data();
      index_t n = params[k]->numel();
      for (index_t i = 0; i < n; ++i) {
        double gi = static_cast<double>(g[i]);
        double mi = b1_ * static_cast<double>(m[i]) + (1.0 - b1_) * gi;
        double vi = b2_ * static_cast<double>(v[i]) + (1.0 - b2_) * gi * gi;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        double mhat = mi / c1;
        double vhat = vi / c2;
        p[i] = static_cast<S>(static_cast<double>(p[i]) -
                              lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::vector<Tensor<S>>& moments1() { return m_; }
  std::vector<Tensor<S>>& moments2() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  double b1_, b2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Tensor<S>> m_;
  std::vector<Tensor<S>> v_;
};

// lr0 decayed by 10 at each milestone epoch reached.
inline double lr_schedule(index_t epoch, const std::vector<index_t>& milestones,
                          double lr0) {
  int hits = 0;
  for (index_t m : milestones)
    if (m <= epoch) ++hits;
  return lr0 / std::pow(10.0, hits);
}

}  // namespace snnkit

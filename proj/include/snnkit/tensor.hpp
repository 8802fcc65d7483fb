#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "snnkit/errors.hpp"

namespace snnkit {

using index_t = std::int64_t;

// Dense row-major tensor. Time, when present, is the innermost axis.
// No broadcasting; shape mismatches are loud errors at the op boundary.
template <class S>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<index_t> shape) : shape_(std::move(shape)) {
    index_t n = 1;
    for (index_t d : shape_) {
      if (d < 0) throw ShapeError("tensor: negative extent in " + shape_str(shape_));
      if (d > 0 && n > (index_t{1} << 48) / d)
        throw ShapeError("tensor: extents overflow in " + shape_str(shape_));
      n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), S(0));
  }

  static Tensor zeros(std::vector<index_t> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<index_t> shape, S v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
  }

  index_t ndim() const { return static_cast<index_t>(shape_.size()); }
  const std::vector<index_t>& shape() const { return shape_; }
  index_t dim(index_t i) const { return shape_[static_cast<std::size_t>(i)]; }
  index_t numel() const { return static_cast<index_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator()(index_t i) { return data_[static_cast<std::size_t>(i)]; }
  S operator()(index_t i) const { return data_[static_cast<std::size_t>(i)]; }
  S& operator()(index_t i, index_t j) {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  S operator()(index_t i, index_t j) const {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  S& operator()(index_t i, index_t j, index_t k) {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  S operator()(index_t i, index_t j, index_t k) const {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  void fill(S v) { data_.assign(data_.size(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  static std::string shape_str(const std::vector<index_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
  }
  std::string shape_str() const { return shape_str(shape_); }

 private:
  std::vector<index_t> shape_;
  std::vector<S> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <class S>
void require_shape(const Tensor<S>& t, const std::vector<index_t>& want,
                   const std::string& what) {
  if (t.shape() != want)
    throw ShapeError(what + ": shape " + t.shape_str() + " does not match expected " +
                     Tensor<S>::shape_str(want));
}

template <class S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const std::string& what) {
  if (!a.same_shape(b))
    throw ShapeError(what + ": shapes " + a.shape_str() + " and " + b.shape_str() +
                     " differ");
}

template <class S>
void require_ndim(const Tensor<S>& t, index_t nd, const std::string& what) {
  if (t.ndim() != nd)
    throw ShapeError(what + ": expected " + std::to_string(nd) + "-d tensor, got shape " +
                     t.shape_str());
}

template <class S>
bool all_finite(const Tensor<S>& t) {
  const S* p = t.data();
  for (index_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(static_cast<double>(p[i]))) return false;
  return true;
}

template <class S>
void require_binary(const Tensor<S>& t, const std::string& what) {
  const S* p = t.data();
  for (index_t i = 0; i < t.numel(); ++i)
    if (p[i] != S(0) && p[i] != S(1))
      throw EncodingError(what + ": input is not binary at flat index " +
                          std::to_string(i));
}

// Value/gradient pair; grad always matches the value's shape.
template <class S>
struct GradBuffer {
  Tensor<S> value;
  Tensor<S> grad;

  GradBuffer() = default;
  explicit GradBuffer(std::vector<index_t> shape)
      : value(shape), grad(std::move(shape)) {}
  explicit GradBuffer(Tensor<S> v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(S(0)); }
};

}  // namespace snnkit

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_TENSOR_HPP_
#define DKWS_TENSOR_HPP_

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dkws {

// Dense row-major tensor of doubles. All numerics in this project run in
// float64 so finite-difference gradient checks apply to the production path.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(Numel(shape)), 0.0);
  }
  Tensor(std::vector<int64_t> s, std::vector<double> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (static_cast<int64_t>(v.size()) != Numel(shape))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  static int64_t Numel(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dim");
      n *= d;
    }
    return n;
  }

  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape.size()); }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  void zero() { std::fill(v.begin(), v.end(), 0.0); }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline Tensor Zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

inline Tensor Full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.v.begin(), t.v.end(), value);
  return t;
}

}  // namespace dkws

#endif  // DKWS_TENSOR_HPP_

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_TESTS_TEST_UTIL_HPP_
#define DKWS_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dkws/autograd.hpp"
#include "dkws/rng.hpp"

namespace dkws::test {

inline Tensor RandT(std::vector<int64_t> shape, uint64_t seed, double lo = -1.0,
                    double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

using Builder = std::function<V(Tape&, const std::vector<V>&)>;

// Compares tape gradients of a random linear functional of the builder output
// against central finite differences; returns the worst relative error over
// every element of every input.
inline double GradCheck(std::vector<Tensor> inputs, const Builder& build,
                        double h = 1e-5) {
  Tape tape;
  std::vector<V> ids;
  for (auto& in : inputs) ids.push_back(tape.leaf(in));
  V out = build(tape, ids);

  Tensor w(tape.val(out).shape);
  Rng rng(0xfeedULL);
  for (double& x : w.v) x = rng.uniform(-1.0, 1.0);

  V loss = ag::sum_all(tape, ag::mul_const(tape, out, w));
  tape.backward(loss);
  std::vector<Tensor> analytic;
  for (V id : ids) analytic.push_back(tape.grad(id));

  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape t2;
    std::vector<V> id2;
    for (const auto& x : xs) id2.push_back(t2.leaf(x));
    V o = build(t2, id2);
    const Tensor& ov = t2.val(o);
    double s = 0.0;
    for (int64_t k = 0; k < ov.numel(); ++k)
      s += ov.v[static_cast<size_t>(k)] * w.v[static_cast<size_t>(k)];
    return s;
  };

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t k = 0; k < inputs[i].v.size(); ++k) {
      std::vector<Tensor> xs = inputs;
      double x0 = xs[i].v[k];
      double hh = h * std::max(1.0, std::abs(x0));
      xs[i].v[k] = x0 + hh;
      double fp = eval(xs);
      xs[i].v[k] = x0 - hh;
      double fm = eval(xs);
      double num = (fp - fm) / (2.0 * hh);
      double ana = analytic[i].v[k];
      double err = std::abs(num - ana) / std::max({1.0, std::abs(num), std::abs(ana)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dkws::test

#endif  // DKWS_TESTS_TEST_UTIL_HPP_

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "test_util.hpp"

using namespace dkws;
using dkws::test::GradCheck;
using dkws::test::RandT;

namespace {
constexpr double kTol = 5e-6;
}

TEST_CASE("tensor basics") {
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.dim(0) == 2);
  CHECK(t.shape_str() == "[2,3]");
  CHECK_THROWS(Tensor({2, 2}, {1.0, 2.0, 3.0}));
  Tensor f = Full({3}, 2.5);
  CHECK(f.v[2] == 2.5);
}

TEST_CASE("tape param hook accumulates") {
  Param p("p", Full({2}, 3.0));
  Tape t;
  V x = t.param(p);
  V loss = ag::sum_all(t, ag::square(t, x));
  t.backward(loss);
  CHECK(p.grad.v[0] == doctest::Approx(6.0));
  CHECK(p.grad.v[1] == doctest::Approx(6.0));
  // second tape adds on top
  Tape t2;
  V x2 = t2.param(p);
  t2.backward(ag::sum_all(t2, x2));
  CHECK(p.grad.v[0] == doctest::Approx(7.0));
}

TEST_CASE("elementwise gradients") {
  Tensor a = RandT({3, 4}, 1), b = RandT({3, 4}, 2);
  CHECK(GradCheck({a, b}, [](Tape& t, const std::vector<V>& x) {
          return ag::add(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a, b}, [](Tape& t, const std::vector<V>& x) {
          return ag::sub(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a, b}, [](Tape& t, const std::vector<V>& x) {
          return ag::mul(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::neg(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::affine(t, x[0], 2.5, -0.75);
        }) < kTol);
  Tensor m = RandT({3, 4}, 3);
  CHECK(GradCheck({a}, [m](Tape& t, const std::vector<V>& x) {
          return ag::mul_const(t, x[0], m);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::sigmoid(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::tanh_(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::exp_(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::square(t, x[0]);
        }) < kTol);
  Tensor pos = RandT({3, 4}, 4, 0.5, 2.0);
  CHECK(GradCheck({pos}, [](Tape& t, const std::vector<V>& x) {
          return ag::log_(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({pos}, [](Tape& t, const std::vector<V>& x) {
          return ag::sqrt_(t, x[0]);
        }) < kTol);
  // keep clear of the kinks at 0 and the clamp edges
  Tensor off = RandT({3, 4}, 5, 0.2, 0.8);
  for (size_t i = 0; i < off.v.size(); i += 2) off.v[i] = -off.v[i];
  CHECK(GradCheck({off}, [](Tape& t, const std::vector<V>& x) {
          return ag::leaky_relu(t, x[0], 0.1);
        }) < kTol);
  CHECK(GradCheck({off}, [](Tape& t, const std::vector<V>& x) {
          return ag::abs_(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({off}, [](Tape& t, const std::vector<V>& x) {
          return ag::clamp(t, x[0], -0.5, 0.5);
        }) < kTol);
}

TEST_CASE("leaky_relu forward values") {
  Tape t;
  V x = t.leaf(Tensor({3}, {-2.0, 0.0, 3.0}));
  V y = ag::leaky_relu(t, x, 0.1);
  CHECK(t.val(y).v[0] == doctest::Approx(-0.2));
  CHECK(t.val(y).v[1] == doctest::Approx(0.0));
  CHECK(t.val(y).v[2] == doctest::Approx(3.0));
}

TEST_CASE("reduction and scalar gradients") {
  Tensor a = RandT({4, 3}, 6);
  Tensor s = RandT({1}, 7, 0.5, 1.5);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::sum_all(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::mean_all(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::index_scalar(t, x[0], 5);
        }) < kTol);
  CHECK(GradCheck({a, s}, [](Tape& t, const std::vector<V>& x) {
          return ag::scale_by(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a, s}, [](Tape& t, const std::vector<V>& x) {
          return ag::div_by(t, x[0], x[1]);
        }) < kTol);
}

TEST_CASE("shape op gradients") {
  Tensor a = RandT({4, 6}, 8);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::reshape(t, x[0], {2, 12});
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::transpose(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::slice_cols(t, x[0], 1, 4);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::slice_rows(t, x[0], 1, 3);
        }) < kTol);
  Tensor b = RandT({4, 2}, 9);
  CHECK(GradCheck({a, b}, [](Tape& t, const std::vector<V>& x) {
          return ag::concat_cols(t, {x[0], x[1]});
        }) < kTol);
  Tensor c = RandT({2, 6}, 10);
  CHECK(GradCheck({a, c}, [](Tape& t, const std::vector<V>& x) {
          return ag::concat_rows(t, {x[0], x[1]});
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::shift_rows(t, x[0], 2);
        }) < kTol);
  Tensor row = RandT({6}, 11);
  CHECK(GradCheck({row}, [](Tape& t, const std::vector<V>& x) {
          return ag::tile_rowvec(t, x[0], 5);
        }) < kTol);
  CHECK(GradCheck({a, row}, [](Tape& t, const std::vector<V>& x) {
          return ag::add_rowvec(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::pair_avg_cols(t, x[0]);
        }) < kTol);
  Tensor cf = RandT({3, 4, 5}, 12);
  CHECK(GradCheck({cf}, [](Tape& t, const std::vector<V>& x) {
          return ag::flatten_cf(t, x[0]);
        }) < kTol);
  Tensor flat = RandT({5, 12}, 13);
  CHECK(GradCheck({flat}, [](Tape& t, const std::vector<V>& x) {
          return ag::unflatten_cf(t, x[0], 3, 4);
        }) < kTol);
  Tensor ch2 = RandT({2, 4, 5}, 14);
  CHECK(GradCheck({cf, ch2}, [](Tape& t, const std::vector<V>& x) {
          return ag::concat_chan(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::prepend_zero_row(t, x[0]);
        }) < kTol);
  CHECK(GradCheck({a}, [](Tape& t, const std::vector<V>& x) {
          return ag::mean_time(t, x[0]);
        }) < kTol);
  Tensor chs = RandT({4}, 15);
  CHECK(GradCheck({a, chs}, [](Tape& t, const std::vector<V>& x) {
          return ag::mul_chan(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({a, chs}, [](Tape& t, const std::vector<V>& x) {
          return ag::add_chan_bias(t, x[0], x[1]);
        }) < kTol);
  CHECK(GradCheck({row}, [](Tape& t, const std::vector<V>& x) {
          return ag::softmax_vec(t, x[0]);
        }) < kTol);
}

TEST_CASE("flatten_cf is channel-major") {
  // x[c,f,t] must land at column c*F + f of row t
  Tensor x({2, 3, 4});
  for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = static_cast<double>(i);
  Tape t;
  V f = ag::flatten_cf(t, t.leaf(x));
  const Tensor& y = t.val(f);
  REQUIRE(y.shape == std::vector<int64_t>({4, 6}));
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t fr = 0; fr < 3; ++fr)
      for (int64_t tt = 0; tt < 4; ++tt)
        CHECK(y.v[static_cast<size_t>(tt * 6 + c * 3 + fr)] ==
              x.v[static_cast<size_t>((c * 3 + fr) * 4 + tt)]);
}

TEST_CASE("matmul and linear gradients") {
  Tensor a = RandT({3, 4}, 16), b = RandT({4, 5}, 17);
  CHECK(GradCheck({a, b}, [](Tape& t, const std::vector<V>& x) {
          return ag::matmul(t, x[0], x[1]);
        }) < kTol);
  Tensor bias = RandT({5}, 18);
  CHECK(GradCheck({a, b, bias}, [](Tape& t, const std::vector<V>& x) {
          return ag::linear(t, x[0], x[1], x[2]);
        }) < kTol);
}

TEST_CASE("conv2d matches a direct loop and is causal") {
  // independent oracle: brute-force the definition y[o,gf,t] =
  // sum_{c,a,b} w[o,c,a,b] x[c, gf*s + a - p, t - b]
  int64_t Ci = 2, F = 8, T = 6, Co = 3, kf = 5, kt = 2;
  int s = 2, p = 2;
  Tensor x = RandT({Ci, F, T}, 19), w = RandT({Co, Ci, kf, kt}, 20);
  Tape t;
  V y = ag::conv2d(t, t.leaf(x), t.leaf(w), s, p);
  int64_t Fo = (F + 2 * p - kf) / s + 1;
  REQUIRE(t.val(y).shape == std::vector<int64_t>({Co, Fo, T}));
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t gf = 0; gf < Fo; ++gf)
      for (int64_t tt = 0; tt < T; ++tt) {
        double acc = 0.0;
        for (int64_t c = 0; c < Ci; ++c)
          for (int64_t a = 0; a < kf; ++a)
            for (int64_t b = 0; b < kt; ++b) {
              int64_t f = gf * s + a - p;
              int64_t tsrc = tt - b;
              if (f < 0 || f >= F || tsrc < 0) continue;
              acc += w.v[static_cast<size_t>(((o * Ci + c) * kf + a) * kt + b)] *
                     x.v[static_cast<size_t>((c * F + f) * T + tsrc)];
            }
        CHECK(t.val(y).v[static_cast<size_t>((o * Fo + gf) * T + tt)] ==
              doctest::Approx(acc).epsilon(1e-12));
      }

  // causality: changing a later input frame never changes an earlier output
  Tensor x2 = x;
  x2.v[static_cast<size_t>((0 * F + 3) * T + 4)] += 1.0;  // frame 4
  Tape t2;
  V y2 = ag::conv2d(t2, t2.leaf(x2), t2.leaf(w), s, p);
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t gf = 0; gf < Fo; ++gf)
      for (int64_t tt = 0; tt < 4; ++tt)
        CHECK(t2.val(y2).v[static_cast<size_t>((o * Fo + gf) * T + tt)] ==
              t.val(y).v[static_cast<size_t>((o * Fo + gf) * T + tt)]);

  CHECK(GradCheck({x, w}, [s, p](Tape& tp, const std::vector<V>& v) {
          return ag::conv2d(tp, v[0], v[1], s, p);
        }) < kTol);
}

TEST_CASE("deconv2d is the adjoint map in frequency and causal in time") {
  int64_t Ci = 3, F = 4, T = 5, Co = 2, kf = 5, kt = 2;
  int s = 2, p = 2, op = 1;
  Tensor x = RandT({Ci, F, T}, 21), w = RandT({Ci, Co, kf, kt}, 22);
  Tape t;
  V y = ag::deconv2d(t, t.leaf(x), t.leaf(w), s, p, op);
  int64_t Fo = (F - 1) * s - 2 * p + kf + op;
  REQUIRE(t.val(y).shape == std::vector<int64_t>({Co, Fo, T}));
  // direct loop oracle
  Tensor ref({Co, Fo, T});
  for (int64_t c = 0; c < Ci; ++c)
    for (int64_t o = 0; o < Co; ++o)
      for (int64_t a = 0; a < kf; ++a)
        for (int64_t b = 0; b < kt; ++b)
          for (int64_t gf = 0; gf < F; ++gf) {
            int64_t f = gf * s + a - p;
            if (f < 0 || f >= Fo) continue;
            for (int64_t tt = b; tt < T; ++tt)
              ref.v[static_cast<size_t>((o * Fo + f) * T + tt)] +=
                  w.v[static_cast<size_t>(((c * Co + o) * kf + a) * kt + b)] *
                  x.v[static_cast<size_t>((c * F + gf) * T + tt - b)];
          }
  for (size_t i = 0; i < ref.v.size(); ++i)
    CHECK(t.val(y).v[i] == doctest::Approx(ref.v[i]).epsilon(1e-12));

  CHECK(GradCheck({x, w}, [s, p, op](Tape& tp, const std::vector<V>& v) {
          return ag::deconv2d(tp, v[0], v[1], s, p, op);
        }) < kTol);
}

TEST_CASE("conv1d same padding and dwconv1d causality") {
  Tensor x = RandT({2, 9}, 23), w = RandT({3, 2, 3}, 24);
  CHECK(GradCheck({x, w}, [](Tape& t, const std::vector<V>& v) {
          return ag::conv1d(t, v[0], v[1], 2);
        }) < kTol);
  Tape t;
  V y = ag::conv1d(t, t.leaf(x), t.leaf(w), 2);
  CHECK(t.val(y).shape == std::vector<int64_t>({3, 9}));

  Tensor dw = RandT({2, 3}, 25);
  CHECK(GradCheck({x, dw}, [](Tape& tp, const std::vector<V>& v) {
          return ag::dwconv1d(tp, v[0], v[1], 2);
        }) < kTol);
  // causal: y[c,t] = sum_b w[c,b] x[c, t - 2b]
  Tape t2;
  V y2 = ag::dwconv1d(t2, t2.leaf(x), t2.leaf(dw), 2);
  for (int64_t c = 0; c < 2; ++c)
    for (int64_t tt = 0; tt < 9; ++tt) {
      double acc = 0.0;
      for (int64_t b = 0; b < 3; ++b)
        if (tt - 2 * b >= 0)
          acc += dw.v[static_cast<size_t>(c * 3 + b)] *
                 x.v[static_cast<size_t>(c * 9 + tt - 2 * b)];
      CHECK(t2.val(y2).v[static_cast<size_t>(c * 9 + tt)] ==
            doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("batchnorm training gradients and eval affine") {
  Tensor x = RandT({3, 10}, 26), g = RandT({3}, 27, 0.5, 1.5), b = RandT({3}, 28);
  CHECK(GradCheck({x, g, b}, [](Tape& t, const std::vector<V>& v) {
          ag::BnState st;
          st.running_mean = Tensor({3});
          st.running_var = Full({3}, 1.0);
          return ag::batchnorm(t, v[0], v[1], v[2], st, true);
        }) < 2e-5);

  // training output is standardized per channel
  {
    Tape t;
    ag::BnState st;
    st.running_mean = Tensor({3});
    st.running_var = Full({3}, 1.0);
    V y = ag::batchnorm(t, t.leaf(x), t.leaf(g), t.leaf(b), st, true);
    const Tensor& Y = t.val(y);
    for (int64_t c = 0; c < 3; ++c) {
      double m = 0, var = 0;
      for (int64_t i = 0; i < 10; ++i) {
        double z = (Y.v[static_cast<size_t>(c * 10 + i)] - b.v[static_cast<size_t>(c)]) /
                   g.v[static_cast<size_t>(c)];
        m += z / 10.0;
        var += z * z / 10.0;
      }
      CHECK(m == doctest::Approx(0.0).epsilon(1e-9));
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shrinks it slightly
    }
    CHECK(st.initialized);
  }

  // eval mode applies a fixed affine from the running statistics
  {
    ag::BnState st;
    st.running_mean = Tensor({3}, {0.5, -0.25, 0.1});
    st.running_var = Tensor({3}, {2.0, 0.5, 1.0});
    st.initialized = true;
    Tape t;
    V y = ag::batchnorm(t, t.leaf(x), t.leaf(g), t.leaf(b), st, false);
    for (int64_t c = 0; c < 3; ++c) {
      double inv = 1.0 / std::sqrt(st.running_var.v[static_cast<size_t>(c)] + st.eps);
      for (int64_t i = 0; i < 10; ++i) {
        double want = g.v[static_cast<size_t>(c)] *
                          (x.v[static_cast<size_t>(c * 10 + i)] -
                           st.running_mean.v[static_cast<size_t>(c)]) * inv +
                      b.v[static_cast<size_t>(c)];
        CHECK(t.val(y).v[static_cast<size_t>(c * 10 + i)] ==
              doctest::Approx(want).epsilon(1e-12));
      }
    }
    // eval-mode gradients (the path used by the enhancement decoder at test time)
    auto builder = [&st](Tape& tp, const std::vector<V>& v) {
      ag::BnState local = st;
      return ag::batchnorm(tp, v[0], v[1], v[2], local, false);
    };
    CHECK(GradCheck({x, g, b}, builder) < kTol);
  }
}

TEST_CASE("rng determinism and derive independence") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  CHECK(Rng::derive(1, 2) != Rng::derive(1, 3));
  CHECK(Rng::derive(1, 2) == Rng::derive(1, 2));
  Rng n(3);
  double m = 0;
  for (int i = 0; i < 10000; ++i) m += n.normal();
  CHECK(std::abs(m / 10000.0) < 0.05);
}

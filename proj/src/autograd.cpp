// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/autograd.hpp"

#include <cmath>
#include <cstring>

namespace dkws {
namespace ag {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

void axpy(Tensor& dst, const Tensor& src) {
  for (int64_t i = 0; i < dst.numel(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

V add(Tape& t, V a, V b) {
  check_same_shape(t.val(a), t.val(b), "add");
  Tensor out = t.val(a);
  const Tensor& vb = t.val(b);
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] += vb.v[i];
  return t.make(std::move(out), [a, b](Tape& tp, V self) {
    axpy(tp.grad(a), tp.grad(self));
    axpy(tp.grad(b), tp.grad(self));
  });
}

V sub(Tape& t, V a, V b) {
  check_same_shape(t.val(a), t.val(b), "sub");
  Tensor out = t.val(a);
  const Tensor& vb = t.val(b);
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] -= vb.v[i];
  return t.make(std::move(out), [a, b](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    axpy(tp.grad(a), g);
    Tensor& gb = tp.grad(b);
    for (int64_t i = 0; i < g.numel(); ++i) gb.v[i] -= g.v[i];
  });
}

V mul(Tape& t, V a, V b) {
  check_same_shape(t.val(a), t.val(b), "mul");
  Tensor out = t.val(a);
  const Tensor& vb = t.val(b);
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] *= vb.v[i];
  return t.make(std::move(out), [a, b](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& va = tp.val(a);
    const Tensor& vb2 = tp.val(b);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int64_t i = 0; i < g.numel(); ++i) {
      ga.v[i] += g.v[i] * vb2.v[i];
      gb.v[i] += g.v[i] * va.v[i];
    }
  });
}

V neg(Tape& t, V a) { return affine(t, a, -1.0, 0.0); }

V affine(Tape& t, V a, double k, double c) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = k * x + c;
  return t.make(std::move(out), [a, k](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += k * g.v[i];
  });
}

V mul_const(Tape& t, V a, const Tensor& m) {
  check_same_shape(t.val(a), m, "mul_const");
  Tensor out = t.val(a);
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] *= m.v[i];
  Tensor mc = m;
  return t.make(std::move(out), [a, mc](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * mc.v[i];
  });
}

V sigmoid(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
  });
}

V tanh_(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = std::tanh(x);
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
  });
}

V leaky_relu(Tape& t, V a, double slope) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = x > 0.0 ? x : slope * x;
  return t.make(std::move(out), [a, slope](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i)
      ga.v[i] += g.v[i] * (x.v[i] > 0.0 ? 1.0 : slope);
  });
}

V log_(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = std::log(x);
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] / x.v[i];
  });
}

V exp_(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = std::exp(x);
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * y.v[i];
  });
}

V sqrt_(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = std::sqrt(x);
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * 0.5 / y.v[i];
  });
}

V square(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = x * x;
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * 2.0 * x.v[i];
  });
}

V abs_(Tape& t, V a) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = std::fabs(x);
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i) {
      double s = x.v[i] > 0.0 ? 1.0 : (x.v[i] < 0.0 ? -1.0 : 0.0);
      ga.v[i] += g.v[i] * s;
    }
  });
}

V clamp(Tape& t, V a, double lo, double hi) {
  Tensor out = t.val(a);
  for (double& x : out.v) x = x < lo ? lo : (x > hi ? hi : x);
  return t.make(std::move(out), [a, lo, hi](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& x = tp.val(a);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < g.numel(); ++i)
      if (x.v[i] > lo && x.v[i] < hi) ga.v[i] += g.v[i];
  });
}

V sum_all(Tape& t, V a) {
  double s = 0.0;
  for (double x : t.val(a).v) s += x;
  Tensor out({1});
  out.v[0] = s;
  return t.make(std::move(out), [a](Tape& tp, V self) {
    double g = tp.grad(self).v[0];
    for (double& x : tp.grad(a).v) x += g;
  });
}

V mean_all(Tape& t, V a) {
  int64_t n = t.val(a).numel();
  double s = 0.0;
  for (double x : t.val(a).v) s += x;
  Tensor out({1});
  out.v[0] = s / static_cast<double>(n);
  return t.make(std::move(out), [a, n](Tape& tp, V self) {
    double g = tp.grad(self).v[0] / static_cast<double>(n);
    for (double& x : tp.grad(a).v) x += g;
  });
}

V index_scalar(Tape& t, V a, int64_t i) {
  if (i < 0 || i >= t.val(a).numel())
    throw std::out_of_range("index_scalar: out of range");
  Tensor out({1});
  out.v[0] = t.val(a).v[static_cast<size_t>(i)];
  return t.make(std::move(out), [a, i](Tape& tp, V self) {
    tp.grad(a).v[static_cast<size_t>(i)] += tp.grad(self).v[0];
  });
}

V scale_by(Tape& t, V x, V s) {
  if (t.val(s).numel() != 1) throw std::invalid_argument("scale_by: s must be scalar");
  double sv = t.val(s).v[0];
  Tensor out = t.val(x);
  for (double& q : out.v) q *= sv;
  return t.make(std::move(out), [x, s](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx = tp.val(x);
    double sv2 = tp.val(s).v[0];
    Tensor& gx = tp.grad(x);
    double acc = 0.0;
    for (int64_t i = 0; i < g.numel(); ++i) {
      gx.v[i] += g.v[i] * sv2;
      acc += g.v[i] * vx.v[i];
    }
    tp.grad(s).v[0] += acc;
  });
}

V div_by(Tape& t, V x, V s) {
  if (t.val(s).numel() != 1) throw std::invalid_argument("div_by: s must be scalar");
  double sv = t.val(s).v[0];
  Tensor out = t.val(x);
  for (double& q : out.v) q /= sv;
  return t.make(std::move(out), [x, s](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    double sv2 = tp.val(s).v[0];
    Tensor& gx = tp.grad(x);
    double acc = 0.0;
    for (int64_t i = 0; i < g.numel(); ++i) {
      gx.v[i] += g.v[i] / sv2;
      acc += g.v[i] * y.v[i];
    }
    tp.grad(s).v[0] -= acc / sv2;
  });
}

V reshape(Tape& t, V a, std::vector<int64_t> shape) {
  if (Tensor::Numel(shape) != t.val(a).numel())
    throw std::invalid_argument("reshape: numel mismatch");
  Tensor out(shape, t.val(a).v);
  return t.make(std::move(out), [a](Tape& tp, V self) {
    axpy(tp.grad(a), tp.grad(self));
  });
}

V transpose(Tape& t, V a) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2) throw std::invalid_argument("transpose: need 2-D");
  int64_t R = x.dim(0), C = x.dim(1);
  Tensor out({C, R});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t c = 0; c < C; ++c) out.v[c * R + r] = x.v[r * C + c];
  return t.make(std::move(out), [a, R, C](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t r = 0; r < R; ++r)
      for (int64_t c = 0; c < C; ++c) ga.v[r * C + c] += g.v[c * R + r];
  });
}

V slice_cols(Tape& t, V a, int64_t c0, int64_t c1) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range");
  int64_t R = x.dim(0), C = x.dim(1), W = c1 - c0;
  Tensor out({R, W});
  for (int64_t r = 0; r < R; ++r)
    std::memcpy(&out.v[r * W], &x.v[r * C + c0], static_cast<size_t>(W) * sizeof(double));
  return t.make(std::move(out), [a, c0, R, C, W](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t r = 0; r < R; ++r)
      for (int64_t c = 0; c < W; ++c) ga.v[r * C + c0 + c] += g.v[r * W + c];
  });
}

V concat_cols(Tape& t, const std::vector<V>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: empty");
  int64_t R = t.val(xs[0]).dim(0);
  int64_t Ctot = 0;
  for (V x : xs) {
    if (t.val(x).ndim() != 2 || t.val(x).dim(0) != R)
      throw std::invalid_argument("concat_cols: row mismatch");
    Ctot += t.val(x).dim(1);
  }
  Tensor out({R, Ctot});
  int64_t off = 0;
  for (V x : xs) {
    const Tensor& v = t.val(x);
    int64_t C = v.dim(1);
    for (int64_t r = 0; r < R; ++r)
      std::memcpy(&out.v[r * Ctot + off], &v.v[r * C], static_cast<size_t>(C) * sizeof(double));
    off += C;
  }
  std::vector<V> ids = xs;
  return t.make(std::move(out), [ids, R, Ctot](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    int64_t off2 = 0;
    for (V x : ids) {
      Tensor& gx = tp.grad(x);
      int64_t C = tp.val(x).dim(1);
      for (int64_t r = 0; r < R; ++r)
        for (int64_t c = 0; c < C; ++c) gx.v[r * C + c] += g.v[r * Ctot + off2 + c];
      off2 += C;
    }
  });
}

V slice_rows(Tape& t, V a, int64_t r0, int64_t r1) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2 || r0 < 0 || r1 > x.dim(0) || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range");
  int64_t C = x.dim(1), H = r1 - r0;
  Tensor out({H, C});
  std::memcpy(out.v.data(), &x.v[r0 * C], static_cast<size_t>(H * C) * sizeof(double));
  return t.make(std::move(out), [a, r0, C, H](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < H * C; ++i) ga.v[r0 * C + i] += g.v[i];
  });
}

V concat_rows(Tape& t, const std::vector<V>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_rows: empty");
  int64_t C = t.val(xs[0]).dim(1);
  int64_t Rtot = 0;
  for (V x : xs) {
    if (t.val(x).ndim() != 2 || t.val(x).dim(1) != C)
      throw std::invalid_argument("concat_rows: col mismatch");
    Rtot += t.val(x).dim(0);
  }
  Tensor out({Rtot, C});
  int64_t off = 0;
  for (V x : xs) {
    const Tensor& v = t.val(x);
    std::memcpy(&out.v[off], v.v.data(), v.v.size() * sizeof(double));
    off += v.numel();
  }
  std::vector<V> ids = xs;
  return t.make(std::move(out), [ids](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    int64_t off2 = 0;
    for (V x : ids) {
      Tensor& gx = tp.grad(x);
      for (int64_t i = 0; i < gx.numel(); ++i) gx.v[i] += g.v[off2 + i];
      off2 += gx.numel();
    }
  });
}

V shift_rows(Tape& t, V a, int64_t k) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2 || k < 0) throw std::invalid_argument("shift_rows: bad args");
  int64_t R = x.dim(0), C = x.dim(1);
  Tensor out({R, C});
  for (int64_t r = k; r < R; ++r)
    std::memcpy(&out.v[r * C], &x.v[(r - k) * C], static_cast<size_t>(C) * sizeof(double));
  return t.make(std::move(out), [a, k, R, C](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t r = k; r < R; ++r)
      for (int64_t c = 0; c < C; ++c) ga.v[(r - k) * C + c] += g.v[r * C + c];
  });
}

V tile_rowvec(Tape& t, V b, int64_t n) {
  const Tensor& x = t.val(b);
  int64_t D = x.numel();
  Tensor out({n, D});
  for (int64_t r = 0; r < n; ++r)
    std::memcpy(&out.v[r * D], x.v.data(), static_cast<size_t>(D) * sizeof(double));
  return t.make(std::move(out), [b, n, D](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& gb = tp.grad(b);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t d = 0; d < D; ++d) gb.v[d] += g.v[r * D + d];
  });
}

V add_rowvec(Tape& t, V x, V b) {
  const Tensor& vx = t.val(x);
  const Tensor& vb = t.val(b);
  if (vx.ndim() != 2 || vb.numel() != vx.dim(1))
    throw std::invalid_argument("add_rowvec: shape mismatch");
  int64_t R = vx.dim(0), D = vx.dim(1);
  Tensor out = vx;
  for (int64_t r = 0; r < R; ++r)
    for (int64_t d = 0; d < D; ++d) out.v[r * D + d] += vb.v[d];
  return t.make(std::move(out), [x, b, R, D](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    axpy(tp.grad(x), g);
    Tensor& gb = tp.grad(b);
    for (int64_t r = 0; r < R; ++r)
      for (int64_t d = 0; d < D; ++d) gb.v[d] += g.v[r * D + d];
  });
}

V pair_avg_cols(Tape& t, V a) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2 || x.dim(1) % 2 != 0)
    throw std::invalid_argument("pair_avg_cols: need even columns");
  int64_t R = x.dim(0), D = x.dim(1), H = D / 2;
  Tensor out({R, H});
  for (int64_t r = 0; r < R; ++r)
    for (int64_t j = 0; j < H; ++j)
      out.v[r * H + j] = 0.5 * (x.v[r * D + 2 * j] + x.v[r * D + 2 * j + 1]);
  return t.make(std::move(out), [a, R, D, H](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t r = 0; r < R; ++r)
      for (int64_t j = 0; j < H; ++j) {
        double gv = 0.5 * g.v[r * H + j];
        ga.v[r * D + 2 * j] += gv;
        ga.v[r * D + 2 * j + 1] += gv;
      }
  });
}

V flatten_cf(Tape& t, V a) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 3) throw std::invalid_argument("flatten_cf: need [C,F,T]");
  int64_t C = x.dim(0), F = x.dim(1), T = x.dim(2);
  Tensor out({T, C * F});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t tt = 0; tt < T; ++tt)
        out.v[tt * C * F + c * F + f] = x.v[(c * F + f) * T + tt];
  return t.make(std::move(out), [a, C, F, T](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t c = 0; c < C; ++c)
      for (int64_t f = 0; f < F; ++f)
        for (int64_t tt = 0; tt < T; ++tt)
          ga.v[(c * F + f) * T + tt] += g.v[tt * C * F + c * F + f];
  });
}

V unflatten_cf(Tape& t, V a, int64_t C, int64_t F) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2 || x.dim(1) != C * F)
    throw std::invalid_argument("unflatten_cf: shape mismatch");
  int64_t T = x.dim(0);
  Tensor out({C, F, T});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t tt = 0; tt < T; ++tt)
        out.v[(c * F + f) * T + tt] = x.v[tt * C * F + c * F + f];
  return t.make(std::move(out), [a, C, F, T](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t c = 0; c < C; ++c)
      for (int64_t f = 0; f < F; ++f)
        for (int64_t tt = 0; tt < T; ++tt)
          ga.v[tt * C * F + c * F + f] += g.v[(c * F + f) * T + tt];
  });
}

V concat_chan(Tape& t, V a, V b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.ndim() != vb.ndim() || va.ndim() < 1)
    throw std::invalid_argument("concat_chan: rank mismatch");
  for (int i = 1; i < va.ndim(); ++i)
    if (va.dim(i) != vb.dim(i)) throw std::invalid_argument("concat_chan: trailing dims differ");
  std::vector<int64_t> shape = va.shape;
  shape[0] = va.dim(0) + vb.dim(0);
  Tensor out(shape);
  std::memcpy(out.v.data(), va.v.data(), va.v.size() * sizeof(double));
  std::memcpy(out.v.data() + va.numel(), vb.v.data(), vb.v.size() * sizeof(double));
  int64_t na = va.numel();
  return t.make(std::move(out), [a, b, na](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    for (int64_t i = 0; i < ga.numel(); ++i) ga.v[i] += g.v[i];
    for (int64_t i = 0; i < gb.numel(); ++i) gb.v[i] += g.v[na + i];
  });
}

V prepend_zero_row(Tape& t, V a) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2) throw std::invalid_argument("prepend_zero_row: need 2-D");
  int64_t R = x.dim(0), C = x.dim(1);
  Tensor out({R + 1, C});
  std::memcpy(&out.v[C], x.v.data(), x.v.size() * sizeof(double));
  return t.make(std::move(out), [a, C](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t i = 0; i < ga.numel(); ++i) ga.v[i] += g.v[C + i];
  });
}

V mean_time(Tape& t, V a) {
  const Tensor& x = t.val(a);
  if (x.ndim() != 2) throw std::invalid_argument("mean_time: need [C,T]");
  int64_t C = x.dim(0), T = x.dim(1);
  Tensor out({C, 1});
  for (int64_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (int64_t tt = 0; tt < T; ++tt) s += x.v[c * T + tt];
    out.v[c] = s / static_cast<double>(T);
  }
  return t.make(std::move(out), [a, C, T](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(a);
    for (int64_t c = 0; c < C; ++c) {
      double gv = g.v[c] / static_cast<double>(T);
      for (int64_t tt = 0; tt < T; ++tt) ga.v[c * T + tt] += gv;
    }
  });
}

V mul_chan(Tape& t, V x, V s) {
  const Tensor& vx = t.val(x);
  const Tensor& vs = t.val(s);
  int64_t C = vx.dim(0);
  if (vs.numel() != C) throw std::invalid_argument("mul_chan: channel mismatch");
  int64_t B = vx.numel() / C;
  Tensor out = vx;
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < B; ++i) out.v[c * B + i] *= vs.v[c];
  return t.make(std::move(out), [x, s, C, B](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& vx2 = tp.val(x);
    const Tensor& vs2 = tp.val(s);
    Tensor& gx = tp.grad(x);
    Tensor& gs = tp.grad(s);
    for (int64_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int64_t i = 0; i < B; ++i) {
        gx.v[c * B + i] += g.v[c * B + i] * vs2.v[c];
        acc += g.v[c * B + i] * vx2.v[c * B + i];
      }
      gs.v[c] += acc;
    }
  });
}

V add_chan_bias(Tape& t, V x, V b) {
  const Tensor& vx = t.val(x);
  const Tensor& vb = t.val(b);
  int64_t C = vx.dim(0);
  if (vb.numel() != C) throw std::invalid_argument("add_chan_bias: channel mismatch");
  int64_t B = vx.numel() / C;
  Tensor out = vx;
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < B; ++i) out.v[c * B + i] += vb.v[c];
  return t.make(std::move(out), [x, b, C, B](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    axpy(tp.grad(x), g);
    Tensor& gb = tp.grad(b);
    for (int64_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int64_t i = 0; i < B; ++i) acc += g.v[c * B + i];
      gb.v[c] += acc;
    }
  });
}

V softmax_vec(Tape& t, V a) {
  Tensor out = t.val(a);
  double mx = out.v[0];
  for (double x : out.v) mx = std::max(mx, x);
  double Z = 0.0;
  for (double& x : out.v) {
    x = std::exp(x - mx);
    Z += x;
  }
  for (double& x : out.v) x /= Z;
  return t.make(std::move(out), [a](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& y = tp.val(self);
    Tensor& ga = tp.grad(a);
    double dot = 0.0;
    for (int64_t i = 0; i < g.numel(); ++i) dot += g.v[i] * y.v[i];
    for (int64_t i = 0; i < g.numel(); ++i) ga.v[i] += y.v[i] * (g.v[i] - dot);
  });
}

V matmul(Tape& t, V a, V b) {
  const Tensor& A = t.val(a);
  const Tensor& B = t.val(b);
  if (A.ndim() != 2 || B.ndim() != 2 || A.dim(1) != B.dim(0))
    throw std::invalid_argument("matmul: shape mismatch " + A.shape_str() + " x " + B.shape_str());
  int64_t M = A.dim(0), K = A.dim(1), N = B.dim(1);
  Tensor out({M, N});
  for (int64_t i = 0; i < M; ++i)
    for (int64_t k = 0; k < K; ++k) {
      double av = A.v[i * K + k];
      if (av == 0.0) continue;
      const double* brow = &B.v[k * N];
      double* orow = &out.v[i * N];
      for (int64_t j = 0; j < N; ++j) orow[j] += av * brow[j];
    }
  return t.make(std::move(out), [a, b, M, K, N](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& A2 = tp.val(a);
    const Tensor& B2 = tp.val(b);
    Tensor& ga = tp.grad(a);
    Tensor& gb = tp.grad(b);
    // dA = g * B^T
    for (int64_t i = 0; i < M; ++i)
      for (int64_t k = 0; k < K; ++k) {
        double acc = 0.0;
        const double* grow = &g.v[i * N];
        const double* brow = &B2.v[k * N];
        for (int64_t j = 0; j < N; ++j) acc += grow[j] * brow[j];
        ga.v[i * K + k] += acc;
      }
    // dB = A^T * g
    for (int64_t i = 0; i < M; ++i)
      for (int64_t k = 0; k < K; ++k) {
        double av = A2.v[i * K + k];
        if (av == 0.0) continue;
        const double* grow = &g.v[i * N];
        double* gbrow = &gb.v[k * N];
        for (int64_t j = 0; j < N; ++j) gbrow[j] += av * grow[j];
      }
  });
}

V linear(Tape& t, V x, V w, V b) {
  V y = matmul(t, x, w);
  return add_rowvec(t, y, b);
}

V conv2d(Tape& t, V x, V w, int stride_f, int pad_f) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w);
  if (X.ndim() != 3 || W.ndim() != 4 || W.dim(1) != X.dim(0))
    throw std::invalid_argument("conv2d: shape mismatch x=" + X.shape_str() +
                                " w=" + W.shape_str());
  int64_t Ci = X.dim(0), F = X.dim(1), T = X.dim(2);
  int64_t Co = W.dim(0), kf = W.dim(2), kt = W.dim(3);
  int64_t Fo = (F + 2 * pad_f - kf) / stride_f + 1;
  if (Fo < 1) throw std::invalid_argument("conv2d: empty frequency output");
  Tensor out({Co, Fo, T});
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t a = 0; a < kf; ++a)
        for (int64_t b = 0; b < kt; ++b) {
          double wv = W.v[((o * Ci + c) * kf + a) * kt + b];
          if (wv == 0.0) continue;
          for (int64_t gf = 0; gf < Fo; ++gf) {
            int64_t f = gf * stride_f + a - pad_f;
            if (f < 0 || f >= F) continue;
            const double* xrow = &X.v[(c * F + f) * T];
            double* yrow = &out.v[(o * Fo + gf) * T];
            // tap b frames into the past (b = 0 is the current frame)
            for (int64_t tt = b; tt < T; ++tt) yrow[tt] += wv * xrow[tt - b];
          }
        }
  return t.make(std::move(out), [x, w, stride_f, pad_f, Ci, F, T, Co, kf, kt, Fo](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& X2 = tp.val(x);
    const Tensor& W2 = tp.val(w);
    Tensor& gx = tp.grad(x);
    Tensor& gw = tp.grad(w);
    for (int64_t o = 0; o < Co; ++o)
      for (int64_t c = 0; c < Ci; ++c)
        for (int64_t a = 0; a < kf; ++a)
          for (int64_t b = 0; b < kt; ++b) {
            double wv = W2.v[((o * Ci + c) * kf + a) * kt + b];
            double acc = 0.0;
            for (int64_t gf = 0; gf < Fo; ++gf) {
              int64_t f = gf * stride_f + a - pad_f;
              if (f < 0 || f >= F) continue;
              const double* xrow = &X2.v[(c * F + f) * T];
              double* gxrow = &gx.v[(c * F + f) * T];
              const double* grow = &g.v[(o * Fo + gf) * T];
              for (int64_t tt = b; tt < T; ++tt) {
                gxrow[tt - b] += wv * grow[tt];
                acc += grow[tt] * xrow[tt - b];
              }
            }
            gw.v[((o * Ci + c) * kf + a) * kt + b] += acc;
          }
  });
}

V deconv2d(Tape& t, V x, V w, int stride_f, int pad_f, int out_pad_f) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w);
  if (X.ndim() != 3 || W.ndim() != 4 || W.dim(0) != X.dim(0))
    throw std::invalid_argument("deconv2d: shape mismatch x=" + X.shape_str() +
                                " w=" + W.shape_str());
  int64_t Ci = X.dim(0), F = X.dim(1), T = X.dim(2);
  int64_t Co = W.dim(1), kf = W.dim(2), kt = W.dim(3);
  int64_t Fo = (F - 1) * stride_f - 2 * pad_f + kf + out_pad_f;
  if (Fo < 1) throw std::invalid_argument("deconv2d: empty frequency output");
  Tensor out({Co, Fo, T});
  for (int64_t c = 0; c < Ci; ++c)
    for (int64_t o = 0; o < Co; ++o)
      for (int64_t a = 0; a < kf; ++a)
        for (int64_t b = 0; b < kt; ++b) {
          double wv = W.v[((c * Co + o) * kf + a) * kt + b];
          if (wv == 0.0) continue;
          for (int64_t gf = 0; gf < F; ++gf) {
            int64_t f = gf * stride_f + a - pad_f;
            if (f < 0 || f >= Fo) continue;
            const double* xrow = &X.v[(c * F + gf) * T];
            double* yrow = &out.v[(o * Fo + f) * T];
            // output frame t receives input frame t - b
            for (int64_t tt = b; tt < T; ++tt) yrow[tt] += wv * xrow[tt - b];
          }
        }
  return t.make(std::move(out), [x, w, stride_f, pad_f, Ci, F, T, Co, kf, kt, Fo](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& X2 = tp.val(x);
    const Tensor& W2 = tp.val(w);
    Tensor& gx = tp.grad(x);
    Tensor& gw = tp.grad(w);
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t o = 0; o < Co; ++o)
        for (int64_t a = 0; a < kf; ++a)
          for (int64_t b = 0; b < kt; ++b) {
            double wv = W2.v[((c * Co + o) * kf + a) * kt + b];
            double acc = 0.0;
            for (int64_t gf = 0; gf < F; ++gf) {
              int64_t f = gf * stride_f + a - pad_f;
              if (f < 0 || f >= Fo) continue;
              const double* xrow = &X2.v[(c * F + gf) * T];
              double* gxrow = &gx.v[(c * F + gf) * T];
              const double* grow = &g.v[(o * Fo + f) * T];
              for (int64_t tt = b; tt < T; ++tt) {
                gxrow[tt - b] += wv * grow[tt];
                acc += grow[tt] * xrow[tt - b];
              }
            }
            gw.v[((c * Co + o) * kf + a) * kt + b] += acc;
          }
  });
}

V conv1d(Tape& t, V x, V w, int dilation) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w);
  if (X.ndim() != 2 || W.ndim() != 3 || W.dim(1) != X.dim(0))
    throw std::invalid_argument("conv1d: shape mismatch");
  int64_t Ci = X.dim(0), T = X.dim(1);
  int64_t Co = W.dim(0), k = W.dim(2);
  int64_t pad = (k - 1) * dilation / 2;
  Tensor out({Co, T});
  for (int64_t o = 0; o < Co; ++o)
    for (int64_t c = 0; c < Ci; ++c)
      for (int64_t b = 0; b < k; ++b) {
        double wv = W.v[(o * Ci + c) * k + b];
        if (wv == 0.0) continue;
        int64_t off = b * dilation - pad;
        const double* xrow = &X.v[c * T];
        double* yrow = &out.v[o * T];
        for (int64_t tt = 0; tt < T; ++tt) {
          int64_t s = tt + off;
          if (s >= 0 && s < T) yrow[tt] += wv * xrow[s];
        }
      }
  return t.make(std::move(out), [x, w, dilation, Ci, T, Co, k, pad](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& X2 = tp.val(x);
    const Tensor& W2 = tp.val(w);
    Tensor& gx = tp.grad(x);
    Tensor& gw = tp.grad(w);
    for (int64_t o = 0; o < Co; ++o)
      for (int64_t c = 0; c < Ci; ++c)
        for (int64_t b = 0; b < k; ++b) {
          double wv = W2.v[(o * Ci + c) * k + b];
          double acc = 0.0;
          int64_t off = b * dilation - pad;
          const double* xrow = &X2.v[c * T];
          double* gxrow = &gx.v[c * T];
          const double* grow = &g.v[o * T];
          for (int64_t tt = 0; tt < T; ++tt) {
            int64_t s = tt + off;
            if (s >= 0 && s < T) {
              gxrow[s] += wv * grow[tt];
              acc += grow[tt] * xrow[s];
            }
          }
          gw.v[(o * Ci + c) * k + b] += acc;
        }
  });
}

V dwconv1d(Tape& t, V x, V w, int dilation) {
  const Tensor& X = t.val(x);
  const Tensor& W = t.val(w);
  if (X.ndim() != 2 || W.ndim() != 2 || W.dim(0) != X.dim(0))
    throw std::invalid_argument("dwconv1d: shape mismatch");
  int64_t C = X.dim(0), T = X.dim(1), k = W.dim(1);
  Tensor out({C, T});
  for (int64_t c = 0; c < C; ++c)
    for (int64_t b = 0; b < k; ++b) {
      double wv = W.v[c * k + b];
      if (wv == 0.0) continue;
      int64_t off = b * dilation;  // taps reach only into the past
      const double* xrow = &X.v[c * T];
      double* yrow = &out.v[c * T];
      for (int64_t tt = off; tt < T; ++tt) yrow[tt] += wv * xrow[tt - off];
    }
  return t.make(std::move(out), [x, w, dilation, C, T, k](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& X2 = tp.val(x);
    const Tensor& W2 = tp.val(w);
    Tensor& gx = tp.grad(x);
    Tensor& gw = tp.grad(w);
    for (int64_t c = 0; c < C; ++c)
      for (int64_t b = 0; b < k; ++b) {
        double wv = W2.v[c * k + b];
        double acc = 0.0;
        int64_t off = b * dilation;
        const double* xrow = &X2.v[c * T];
        double* gxrow = &gx.v[c * T];
        const double* grow = &g.v[c * T];
        for (int64_t tt = off; tt < T; ++tt) {
          gxrow[tt - off] += wv * grow[tt];
          acc += grow[tt] * xrow[tt - off];
        }
        gw.v[c * k + b] += acc;
      }
  });
}

V batchnorm(Tape& t, V x, V gamma, V beta, BnState& st, bool training) {
  const Tensor& X = t.val(x);
  int64_t C = X.dim(0);
  int64_t B = X.numel() / C;
  if (t.val(gamma).numel() != C || t.val(beta).numel() != C)
    throw std::invalid_argument("batchnorm: param mismatch");
  if (st.running_mean.numel() != C)
    throw std::invalid_argument("batchnorm: state mismatch");

  if (!training) {
    // eval mode: fixed per-channel affine from running statistics
    std::vector<double> scale(static_cast<size_t>(C)), shift(static_cast<size_t>(C));
    const Tensor& G = t.val(gamma);
    const Tensor& Bt = t.val(beta);
    for (int64_t c = 0; c < C; ++c) {
      double inv = 1.0 / std::sqrt(st.running_var.v[c] + st.eps);
      scale[c] = G.v[c] * inv;
      shift[c] = Bt.v[c] - G.v[c] * st.running_mean.v[c] * inv;
    }
    Tensor out = X;
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < B; ++i) out.v[c * B + i] = scale[c] * out.v[c * B + i] + shift[c];
    std::vector<double> rm(st.running_mean.v), rv(st.running_var.v);
    double eps = st.eps;
    return t.make(std::move(out), [x, gamma, beta, C, B, rm, rv, eps](Tape& tp, V self) {
      const Tensor& g = tp.grad(self);
      const Tensor& X2 = tp.val(x);
      const Tensor& G2 = tp.val(gamma);
      Tensor& gx = tp.grad(x);
      Tensor& gg = tp.grad(gamma);
      Tensor& gb = tp.grad(beta);
      for (int64_t c = 0; c < C; ++c) {
        double inv = 1.0 / std::sqrt(rv[c] + eps);
        double accg = 0.0, accb = 0.0;
        for (int64_t i = 0; i < B; ++i) {
          double gv = g.v[c * B + i];
          gx.v[c * B + i] += gv * G2.v[c] * inv;
          accg += gv * (X2.v[c * B + i] - rm[c]) * inv;
          accb += gv;
        }
        gg.v[c] += accg;
        gb.v[c] += accb;
      }
    });
  }

  std::vector<double> mu(static_cast<size_t>(C)), var(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) {
    double s = 0.0;
    for (int64_t i = 0; i < B; ++i) s += X.v[c * B + i];
    mu[c] = s / static_cast<double>(B);
    double q = 0.0;
    for (int64_t i = 0; i < B; ++i) {
      double d = X.v[c * B + i] - mu[c];
      q += d * d;
    }
    var[c] = q / static_cast<double>(B);
    if (!st.initialized) {
      // first training batch seeds the statistics directly
      st.running_mean.v[c] = mu[c];
      st.running_var.v[c] = var[c];
    } else {
      st.running_mean.v[c] = (1.0 - st.momentum) * st.running_mean.v[c] + st.momentum * mu[c];
      st.running_var.v[c] = (1.0 - st.momentum) * st.running_var.v[c] + st.momentum * var[c];
    }
  }
  st.initialized = true;
  const Tensor& G = t.val(gamma);
  const Tensor& Bt = t.val(beta);
  Tensor out(X.shape);
  double eps = st.eps;
  for (int64_t c = 0; c < C; ++c) {
    double inv = 1.0 / std::sqrt(var[c] + eps);
    for (int64_t i = 0; i < B; ++i)
      out.v[c * B + i] = G.v[c] * (X.v[c * B + i] - mu[c]) * inv + Bt.v[c];
  }
  return t.make(std::move(out), [x, gamma, beta, C, B, mu, var, eps](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    const Tensor& X2 = tp.val(x);
    const Tensor& G2 = tp.val(gamma);
    Tensor& gx = tp.grad(x);
    Tensor& gg = tp.grad(gamma);
    Tensor& gb = tp.grad(beta);
    double m = static_cast<double>(B);
    for (int64_t c = 0; c < C; ++c) {
      double inv = 1.0 / std::sqrt(var[c] + eps);
      double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0, accg = 0.0, accb = 0.0;
      for (int64_t i = 0; i < B; ++i) {
        double xhat = (X2.v[c * B + i] - mu[c]) * inv;
        double dxhat = g.v[c * B + i] * G2.v[c];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xhat;
        accg += g.v[c * B + i] * xhat;
        accb += g.v[c * B + i];
      }
      for (int64_t i = 0; i < B; ++i) {
        double xhat = (X2.v[c * B + i] - mu[c]) * inv;
        double dxhat = g.v[c * B + i] * G2.v[c];
        gx.v[c * B + i] += inv * (dxhat - sum_dxhat / m - xhat * sum_dxhat_xhat / m);
      }
      gg.v[c] += accg;
      gb.v[c] += accb;
    }
  });
}

}  // namespace ag
}  // namespace dkws

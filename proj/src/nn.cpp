// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/nn.hpp"

#include <cmath>

namespace dkws {

using namespace ag;

Tensor RandnInit(Rng& rng, std::vector<int64_t> shape, double stddev) {
  Tensor t(std::move(shape));
  for (double& x : t.v) x = rng.normal(0.0, stddev);
  return t;
}

void Linear::init(const std::string& name, int64_t in, int64_t out, Rng& rng) {
  W = Param(name + ".W", RandnInit(rng, {in, out}, 1.0 / std::sqrt(static_cast<double>(in))));
  b = Param(name + ".b", Tensor({out}));
}

V Linear::apply(Tape& t, V x) {
  return linear(t, x, t.param(W), t.param(b));
}

void ComplexLinear::init(const std::string& name, int64_t in, int64_t out, Rng& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(in));
  Wr = Param(name + ".Wr", RandnInit(rng, {in, out}, s));
  Wi = Param(name + ".Wi", RandnInit(rng, {in, out}, s));
  br = Param(name + ".br", Tensor({out}));
  bi = Param(name + ".bi", Tensor({out}));
}

CVar ComplexLinear::apply(Tape& t, CVar x) {
  V wr = t.param(Wr), wi = t.param(Wi);
  V yr = sub(t, matmul(t, x.re, wr), matmul(t, x.im, wi));
  V yi = add(t, matmul(t, x.im, wr), matmul(t, x.re, wi));
  return {add_rowvec(t, yr, t.param(br)), add_rowvec(t, yi, t.param(bi))};
}

void BatchNorm::init(const std::string& name, int64_t channels) {
  gamma = Param(name + ".gamma", Full({channels}, 1.0));
  beta = Param(name + ".beta", Tensor({channels}));
  state.running_mean = Tensor({channels});
  state.running_var = Full({channels}, 1.0);
}

V BatchNorm::apply(Tape& t, V x, bool training) {
  return batchnorm(t, x, t.param(gamma), t.param(beta), state, training);
}

void ComplexConv2d::init(const std::string& name, int64_t in_pairs, int64_t out_pairs, int kf,
                         int kt, Rng& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(in_pairs * kf * kt));
  Wr = Param(name + ".Wr", RandnInit(rng, {out_pairs, in_pairs, kf, kt}, s));
  Wi = Param(name + ".Wi", RandnInit(rng, {out_pairs, in_pairs, kf, kt}, s));
  br = Param(name + ".br", Tensor({out_pairs}));
  bi = Param(name + ".bi", Tensor({out_pairs}));
  bn_r.init(name + ".bn_r", out_pairs);
  bn_i.init(name + ".bn_i", out_pairs);
}

CVar ComplexConv2d::apply(Tape& t, CVar x, bool training) {
  V wr = t.param(Wr), wi = t.param(Wi);
  V rr = conv2d(t, x.re, wr, stride_f, pad_f);
  V ii = conv2d(t, x.im, wi, stride_f, pad_f);
  V ri = conv2d(t, x.re, wi, stride_f, pad_f);
  V ir = conv2d(t, x.im, wr, stride_f, pad_f);
  V yr = add_chan_bias(t, sub(t, rr, ii), t.param(br));
  V yi = add_chan_bias(t, add(t, ri, ir), t.param(bi));
  if (norm_act) {
    yr = leaky_relu(t, bn_r.apply(t, yr, training), kLeakySlope);
    yi = leaky_relu(t, bn_i.apply(t, yi, training), kLeakySlope);
  }
  return {yr, yi};
}

void ComplexConv2d::collect(ParamList& ps) {
  ps.push_back(&Wr);
  ps.push_back(&Wi);
  ps.push_back(&br);
  ps.push_back(&bi);
  if (norm_act) {
    bn_r.collect(ps);
    bn_i.collect(ps);
  }
}

void ComplexDeconv2d::init(const std::string& name, int64_t in_pairs, int64_t out_pairs, int kf,
                           int kt, Rng& rng) {
  double s = 1.0 / std::sqrt(static_cast<double>(in_pairs * kf * kt));
  Wr = Param(name + ".Wr", RandnInit(rng, {in_pairs, out_pairs, kf, kt}, s));
  Wi = Param(name + ".Wi", RandnInit(rng, {in_pairs, out_pairs, kf, kt}, s));
  br = Param(name + ".br", Tensor({out_pairs}));
  bi = Param(name + ".bi", Tensor({out_pairs}));
  bn_r.init(name + ".bn_r", out_pairs);
  bn_i.init(name + ".bn_i", out_pairs);
}

CVar ComplexDeconv2d::apply(Tape& t, CVar x, bool training) {
  V wr = t.param(Wr), wi = t.param(Wi);
  V rr = deconv2d(t, x.re, wr, stride_f, pad_f, out_pad_f);
  V ii = deconv2d(t, x.im, wi, stride_f, pad_f, out_pad_f);
  V ri = deconv2d(t, x.re, wi, stride_f, pad_f, out_pad_f);
  V ir = deconv2d(t, x.im, wr, stride_f, pad_f, out_pad_f);
  V yr = add_chan_bias(t, sub(t, rr, ii), t.param(br));
  V yi = add_chan_bias(t, add(t, ri, ir), t.param(bi));
  if (norm_act) {
    yr = leaky_relu(t, bn_r.apply(t, yr, training), kLeakySlope);
    yi = leaky_relu(t, bn_i.apply(t, yi, training), kLeakySlope);
  }
  return {yr, yi};
}

void ComplexDeconv2d::collect(ParamList& ps) {
  ps.push_back(&Wr);
  ps.push_back(&Wi);
  ps.push_back(&br);
  ps.push_back(&bi);
  if (norm_act) {
    bn_r.collect(ps);
    bn_i.collect(ps);
  }
}

void Lstm::init(const std::string& name, int64_t in, int64_t h, int layers, Rng& rng) {
  hidden = h;
  Wx.clear();
  Wh.clear();
  b.clear();
  for (int l = 0; l < layers; ++l) {
    int64_t d = l == 0 ? in : h;
    double s = 1.0 / std::sqrt(static_cast<double>(d));
    std::string p = name + ".l" + std::to_string(l);
    Wx.emplace_back(p + ".Wx", RandnInit(rng, {d, 4 * h}, s));
    Wh.emplace_back(p + ".Wh", RandnInit(rng, {h, 4 * h}, 1.0 / std::sqrt(static_cast<double>(h))));
    b.emplace_back(p + ".b", Tensor({4 * h}));
  }
}

V Lstm::run(Tape& t, V xseq) {
  int64_t T = t.val(xseq).dim(0);
  V seq = xseq;
  for (size_t l = 0; l < Wx.size(); ++l) {
    V wx = t.param(Wx[l]);
    V wh = t.param(Wh[l]);
    V bias = t.param(b[l]);
    // zi = x W (all frames at once); recurrence adds h W per step
    V zx = add_rowvec(t, matmul(t, seq, wx), bias);
    V h = t.leaf(Tensor({1, hidden}));
    V c = t.leaf(Tensor({1, hidden}));
    std::vector<V> outs;
    outs.reserve(static_cast<size_t>(T));
    for (int64_t step = 0; step < T; ++step) {
      V z = add(t, slice_rows(t, zx, step, step + 1), matmul(t, h, wh));
      V gi = sigmoid(t, slice_cols(t, z, 0, hidden));
      V gf = sigmoid(t, slice_cols(t, z, hidden, 2 * hidden));
      V gg = tanh_(t, slice_cols(t, z, 2 * hidden, 3 * hidden));
      V go = sigmoid(t, slice_cols(t, z, 3 * hidden, 4 * hidden));
      c = add(t, mul(t, gf, c), mul(t, gi, gg));
      h = mul(t, go, tanh_(t, c));
      outs.push_back(h);
    }
    seq = concat_rows(t, outs);
  }
  return seq;
}

void Lstm::collect(ParamList& ps) {
  for (size_t l = 0; l < Wx.size(); ++l) {
    ps.push_back(&Wx[l]);
    ps.push_back(&Wh[l]);
    ps.push_back(&b[l]);
  }
}

void ComplexLstm::init(const std::string& name, int64_t in, int64_t h, int layers, Rng& rng) {
  Lr.init(name + ".r", in, h, layers, rng);
  Li.init(name + ".i", in, h, layers, rng);
}

CVar ComplexLstm::run(Tape& t, CVar x) {
  V rr = Lr.run(t, x.re);
  V ii = Li.run(t, x.im);
  V ri = Lr.run(t, x.im);
  V ir = Li.run(t, x.re);
  return {sub(t, rr, ii), add(t, ri, ir)};
}

void Conv1d::init(const std::string& name, int64_t ci, int64_t co, int k, int dil, Rng& rng) {
  dilation = dil;
  double s = 1.0 / std::sqrt(static_cast<double>(ci * k));
  W = Param(name + ".W", RandnInit(rng, {co, ci, k}, s));
  b = Param(name + ".b", Tensor({co}));
}

V Conv1d::apply(Tape& t, V x) {
  return add_chan_bias(t, conv1d(t, x, t.param(W), dilation), t.param(b));
}

void DepthwiseConv1d::init(const std::string& name, int64_t c, int k, int dil, Rng& rng) {
  dilation = dil;
  W = Param(name + ".W", RandnInit(rng, {c, k}, 1.0 / std::sqrt(static_cast<double>(k))));
}

V DepthwiseConv1d::apply(Tape& t, V x) {
  return dwconv1d(t, x, t.param(W), dilation);
}

void SeBlock::init(const std::string& name, int64_t channels, int64_t bottleneck, Rng& rng) {
  down.init(name + ".down", channels, bottleneck, rng);
  up.init(name + ".up", bottleneck, channels, rng);
}

V SeBlock::apply(Tape& t, V x) {
  int64_t C = t.val(x).dim(0);
  V avg = transpose(t, mean_time(t, x));              // [1, C]
  V gate = sigmoid(t, up.apply(t, leaky_relu(t, down.apply(t, avg), kLeakySlope)));
  return mul_chan(t, x, reshape(t, gate, {C}));
}

void AttentiveStatsPool::init(const std::string& name, int64_t channels, int64_t att_dim,
                              Rng& rng) {
  att_hidden.init(name + ".hidden", channels, att_dim, rng);
  att_score.init(name + ".score", att_dim, 1, rng);
}

V AttentiveStatsPool::apply(Tape& t, V x) {
  int64_t C = t.val(x).dim(0), T = t.val(x).dim(1);
  V frames = transpose(t, x);                                     // [T, C]
  V scores = att_score.apply(t, tanh_(t, att_hidden.apply(t, frames)));  // [T, 1]
  V w = softmax_vec(t, scores);                                   // [T, 1]
  V mean = matmul(t, x, w);                                       // [C, 1]
  V meansq = matmul(t, square(t, x), w);                          // [C, 1]
  V var = sub(t, meansq, square(t, mean));
  V std_ = sqrt_(t, affine(t, clamp(t, var, 0.0, 1e300), 1.0, 1e-8));
  (void)T;
  return concat_cols(t, {transpose(t, mean), transpose(t, std_)});  // [1, 2C]
}

}  // namespace dkws

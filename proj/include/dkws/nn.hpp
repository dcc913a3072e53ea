// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_NN_HPP_
#define DKWS_NN_HPP_

#include <string>
#include <vector>

#include "dkws/autograd.hpp"
#include "dkws/rng.hpp"

namespace dkws {

// Real/imag node pair flowing through the complex-valued parts of the model.
struct CVar {
  V re = -1;
  V im = -1;
};

constexpr double kLeakySlope = 0.1;

using ParamList = std::vector<Param*>;

Tensor RandnInit(Rng& rng, std::vector<int64_t> shape, double stddev);

struct Linear {
  Param W;  // [in, out]
  Param b;  // [out]
  void init(const std::string& name, int64_t in, int64_t out, Rng& rng);
  V apply(Tape& t, V x);  // x [T, in] -> [T, out]
  void collect(ParamList& ps) {
    ps.push_back(&W);
    ps.push_back(&b);
  }
  int64_t weight_count() const { return W.value.numel(); }
  int64_t bias_count() const { return b.value.numel(); }
};

// out_r = Wr xr - Wi xi + br ; out_i = Wr xi + Wi xr + bi
struct ComplexLinear {
  Param Wr, Wi;  // [in, out] per part
  Param br, bi;  // [out]
  void init(const std::string& name, int64_t in, int64_t out, Rng& rng);
  CVar apply(Tape& t, CVar x);
  void collect(ParamList& ps) {
    ps.push_back(&Wr);
    ps.push_back(&Wi);
    ps.push_back(&br);
    ps.push_back(&bi);
  }
};

struct BatchNorm {
  Param gamma, beta;  // [C]
  ag::BnState state;
  void init(const std::string& name, int64_t channels);
  V apply(Tape& t, V x, bool training);
  void collect(ParamList& ps) {
    ps.push_back(&gamma);
    ps.push_back(&beta);
  }
};

// Complex 2-D convolution block: kernel (kf x kt) with kt covering the current
// and previous frames only, stride (stride_f, 1), frequency zero-padding pad_f.
struct ComplexConv2d {
  Param Wr, Wi;  // [out_pairs, in_pairs, kf, kt]
  Param br, bi;  // [out_pairs]
  BatchNorm bn_r, bn_i;
  int stride_f = 2, pad_f = 2;
  bool norm_act = true;  // BN + leaky rectifier after the bias
  void init(const std::string& name, int64_t in_pairs, int64_t out_pairs, int kf, int kt,
            Rng& rng);
  CVar apply(Tape& t, CVar x, bool training);
  void collect(ParamList& ps);
};

// Transposed counterpart used by the enhancement decoder.
struct ComplexDeconv2d {
  Param Wr, Wi;  // [in_pairs, out_pairs, kf, kt]
  Param br, bi;
  BatchNorm bn_r, bn_i;
  int stride_f = 2, pad_f = 2, out_pad_f = 1;
  bool norm_act = true;
  void init(const std::string& name, int64_t in_pairs, int64_t out_pairs, int kf, int kt,
            Rng& rng);
  CVar apply(Tape& t, CVar x, bool training);
  void collect(ParamList& ps);
};

struct Lstm {
  // one entry per layer
  std::vector<Param> Wx;  // [in, 4H]
  std::vector<Param> Wh;  // [H, 4H]
  std::vector<Param> b;   // [4H]
  int64_t hidden = 0;
  void init(const std::string& name, int64_t in, int64_t h, int layers, Rng& rng);
  V run(Tape& t, V xseq);  // [T, in] -> [T, H], zero initial state
  void collect(ParamList& ps);
};

// out_r = Lr(xr) - Li(xi) ; out_i = Lr(xi) + Li(xr), each part hidden `h`.
struct ComplexLstm {
  Lstm Lr, Li;
  void init(const std::string& name, int64_t in, int64_t h, int layers, Rng& rng);
  CVar run(Tape& t, CVar x);
  void collect(ParamList& ps) {
    Lr.collect(ps);
    Li.collect(ps);
  }
};

struct Conv1d {
  Param W;  // [Co, Ci, k]
  Param b;  // [Co]
  int dilation = 1;
  void init(const std::string& name, int64_t ci, int64_t co, int k, int dil, Rng& rng);
  V apply(Tape& t, V x);  // [Ci,T] -> [Co,T], symmetric same padding
  void collect(ParamList& ps) {
    ps.push_back(&W);
    ps.push_back(&b);
  }
};

struct DepthwiseConv1d {
  Param W;  // [C, k]
  int dilation = 1;
  void init(const std::string& name, int64_t c, int k, int dil, Rng& rng);
  V apply(Tape& t, V x);  // causal
  void collect(ParamList& ps) { ps.push_back(&W); }
};

// Squeeze-excitation over time: per-channel gate from the time-averaged vector.
struct SeBlock {
  Linear down, up;
  void init(const std::string& name, int64_t channels, int64_t bottleneck, Rng& rng);
  V apply(Tape& t, V x);  // [C,T] -> [C,T]
  void collect(ParamList& ps) {
    down.collect(ps);
    up.collect(ps);
  }
};

// Attentive statistics pooling: softmax attention over frames, weighted mean
// and standard deviation concatenated -> [1, 2C].
struct AttentiveStatsPool {
  Linear att_hidden;  // [C -> A]
  Linear att_score;   // [A -> 1]
  void init(const std::string& name, int64_t channels, int64_t att_dim, Rng& rng);
  V apply(Tape& t, V x);  // [C,T] -> [1, 2C]
  void collect(ParamList& ps) {
    att_hidden.collect(ps);
    att_score.collect(ps);
  }
};

}  // namespace dkws

#endif  // DKWS_NN_HPP_

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/model.hpp"

#include <cmath>
#include <sstream>

namespace dkws {

using namespace ag;

std::string to_string(ProjectionMode m) {
  switch (m) {
    case ProjectionMode::kPlain: return "plain";
    case ProjectionMode::kBiasConcat: return "bias";
    case ProjectionMode::kContextLinear: return "ccl";
  }
  return "?";
}

std::string to_string(BiasMode m) {
  switch (m) {
    case BiasMode::kFixed: return "fixed";
    case BiasMode::kVaried: return "varied";
    case BiasMode::kSpeakerDependent: return "speaker";
    case BiasMode::kLearnable: return "learnable";
  }
  return "?";
}

ProjectionMode projection_from_string(const std::string& s) {
  if (s == "plain") return ProjectionMode::kPlain;
  if (s == "bias") return ProjectionMode::kBiasConcat;
  if (s == "ccl") return ProjectionMode::kContextLinear;
  throw std::invalid_argument("unknown projection mode '" + s + "' (plain|bias|ccl)");
}

BiasMode bias_mode_from_string(const std::string& s) {
  if (s == "fixed") return BiasMode::kFixed;
  if (s == "varied") return BiasMode::kVaried;
  if (s == "speaker") return BiasMode::kSpeakerDependent;
  if (s == "learnable") return BiasMode::kLearnable;
  throw std::invalid_argument("unknown bias mode '" + s + "' (fixed|varied|speaker|learnable)");
}

void ModelConfig::validate() const {
  if (encoder_channels.empty()) throw std::invalid_argument("ModelConfig: no encoder layers");
  for (int c : encoder_channels)
    if (c < 2 || c % 2 != 0)
      throw std::invalid_argument("ModelConfig: channel counts must be even and >= 2");
  int f = freq_bins();
  for (int l = 0; l < num_layers(); ++l) {
    if (f % 2 != 0)
      throw std::invalid_argument("ModelConfig: frequency extent not divisible at layer " +
                                  std::to_string(l));
    f /= 2;
  }
  if (f < 1) throw std::invalid_argument("ModelConfig: too many encoder layers for fft size");
  if (kws_dim % 2 != 0) throw std::invalid_argument("ModelConfig: kws_dim must be even");
  if (bias_dim % 2 != 0) throw std::invalid_argument("ModelConfig: bias_dim must be even");
  if (context_frames < 1) throw std::invalid_argument("ModelConfig: context_frames >= 1");
  if (dtc_blocks < 1 || dtc_kernel < 1)
    throw std::invalid_argument("ModelConfig: bad KWS stack geometry");
  if (dilation_cycle.empty()) throw std::invalid_argument("ModelConfig: empty dilation cycle");
}

std::string ModelConfig::canonical() const {
  std::ostringstream os;
  os << "sample_rate=" << sample_rate << "\n";
  os << "win=" << spectro.win(sample_rate) << " hop=" << spectro.hop(sample_rate)
     << " fft=" << spectro.fft_size << " window=" << spectro.window << "\n";
  os << "channels=";
  for (int c : encoder_channels) os << c << ",";
  os << "\nkernel=" << conv_kernel_f << "x" << conv_kernel_t << "\n";
  os << "lstm=" << lstm_hidden << "x" << lstm_layers << " proj=" << lstm_proj << "\n";
  os << "kws_dim=" << kws_dim << " dtc=" << dtc_blocks << " k=" << dtc_kernel << " dil=";
  for (int d : dilation_cycle) os << d << ",";
  os << "\nctx=" << context_frames << " bias_dim=" << bias_dim << " mel=" << mel_bins
     << " bias_ch=" << bias_channels << " bias_blocks=" << bias_blocks
     << " bias_att=" << bias_att_dim << "\n";
  os << "projection=" << to_string(projection) << " bias_mode=" << to_string(bias_mode)
     << " feature_merge=" << (feature_merge ? 1 : 0) << " kws_only=" << (kws_only ? 1 : 0)
     << "\n";
  return os.str();
}

uint64_t ModelConfig::hash() const {
  uint64_t h = 1469598103934665603ULL;
  for (char c : canonical()) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

void DtcBlock::init(const std::string& name, int64_t c, int kernel, int dil, Rng& rng) {
  dw.init(name + ".dw", c, kernel, dil, rng);
  bn.init(name + ".bn", c);
  double s = 1.0 / std::sqrt(static_cast<double>(c));
  pw1_W = Param(name + ".pw1.W", RandnInit(rng, {c, c}, s));
  pw1_b = Param(name + ".pw1.b", Tensor({c}));
  pw2_W = Param(name + ".pw2.W", RandnInit(rng, {c, c}, s));
  pw2_b = Param(name + ".pw2.b", Tensor({c}));
}

V DtcBlock::apply(Tape& t, V x, bool training) {
  V h = dw.apply(t, x);
  h = leaky_relu(t, bn.apply(t, h, training), kLeakySlope);
  h = add_chan_bias(t, matmul(t, t.param(pw1_W), h), t.param(pw1_b));
  h = leaky_relu(t, h, kLeakySlope);
  h = add_chan_bias(t, matmul(t, t.param(pw2_W), h), t.param(pw2_b));
  return add(t, x, h);
}

void DtcBlock::collect(ParamList& ps) {
  dw.collect(ps);
  bn.collect(ps);
  ps.push_back(&pw1_W);
  ps.push_back(&pw1_b);
  ps.push_back(&pw2_W);
  ps.push_back(&pw2_b);
}

void BiasEncoder::init(const ModelConfig& cfg, Rng& rng) {
  mel_bins = cfg.mel_bins;
  convs.clear();
  bns.clear();
  ses.clear();
  int64_t c = cfg.bias_channels;
  for (int b = 0; b < cfg.bias_blocks; ++b) {
    std::string name = "bias_enc.block" + std::to_string(b);
    int64_t in = b == 0 ? cfg.mel_bins : c;
    int k = b == 0 ? 5 : 3;
    int dil = b == 0 ? 1 : b + 1;  // dilations 1, 2, 3
    convs.emplace_back();
    convs.back().init(name + ".conv", in, c, k, dil, rng);
    bns.emplace_back();
    bns.back().init(name + ".bn", c);
    ses.emplace_back();
    ses.back().init(name + ".se", c, std::max<int64_t>(4, c / 8), rng);
  }
  pool.init("bias_enc.pool", c, cfg.bias_att_dim, rng);
  out.init("bias_enc.out", 2 * c, cfg.bias_dim, rng);
}

V BiasEncoder::embed(Tape& t, V mel, bool training) {
  V h = mel;
  for (size_t b = 0; b < convs.size(); ++b) {
    h = convs[b].apply(t, h);
    h = leaky_relu(t, bns[b].apply(t, h, training), kLeakySlope);
    h = ses[b].apply(t, h);
  }
  return out.apply(t, pool.apply(t, h));
}

void BiasEncoder::collect(ParamList& ps) {
  for (size_t b = 0; b < convs.size(); ++b) {
    convs[b].collect(ps);
    bns[b].collect(ps);
    ses[b].collect(ps);
  }
  pool.collect(ps);
  out.collect(ps);
}

KwsModel::KwsModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(Rng::derive(seed, 0x6d6f64656c));
  const int L = cfg_.num_layers();
  const bool needs_bias = cfg_.projection != ProjectionMode::kPlain && !cfg_.kws_only;

  if (!cfg_.kws_only) {
    int64_t in_pairs = 1;
    for (int l = 0; l < L; ++l) {
      int64_t out_pairs = cfg_.encoder_channels[static_cast<size_t>(l)] / 2;
      enc_.emplace_back();
      enc_.back().pad_f = (cfg_.conv_kernel_f - 1) / 2;
      enc_.back().init("enc.l" + std::to_string(l), in_pairs, out_pairs, cfg_.conv_kernel_f,
                       cfg_.conv_kernel_t, rng);
      in_pairs = out_pairs;
    }
    lstm_.init("lstm", cfg_.part_dim(), cfg_.lstm_hidden, cfg_.lstm_layers, rng);
    lstm_proj_.init("lstm_proj", cfg_.lstm_hidden, cfg_.lstm_proj, rng);
    dec_expand_.init("dec_expand", cfg_.lstm_proj, cfg_.part_dim(), rng);
    for (int l = L - 1; l >= 0; --l) {
      int64_t in_pairs2 = cfg_.encoder_channels[static_cast<size_t>(l)];  // doubled by skip
      int64_t out_pairs = l > 0 ? cfg_.encoder_channels[static_cast<size_t>(l - 1)] / 2 : 1;
      dec_.emplace_back();
      dec_.back().pad_f = (cfg_.conv_kernel_f - 1) / 2;
      dec_.back().out_pad_f = 1;
      dec_.back().norm_act = l > 0;  // final layer emits the unbounded mask
      dec_.back().init("dec.l" + std::to_string(l), in_pairs2, out_pairs, cfg_.conv_kernel_f,
                       cfg_.conv_kernel_t, rng);
    }
    if (cfg_.feature_merge) {
      Tensor w({static_cast<int64_t>(L)});
      w.v[static_cast<size_t>(L - 1)] = 1.0;  // identity over the final layer
      merge_w_ = Param("merge.w", std::move(w));
    }
    switch (cfg_.projection) {
      case ProjectionMode::kPlain:
        proj_plain_.init("proj.plain", cfg_.flat_dim(), cfg_.kws_dim, rng);
        break;
      case ProjectionMode::kBiasConcat:
        proj_bias_.init("proj.bias", cfg_.flat_dim() + cfg_.bias_dim, cfg_.kws_dim, rng);
        break;
      case ProjectionMode::kContextLinear: {
        int64_t in = cfg_.part_dim() + cfg_.bias_dim / 2;
        int64_t outd = cfg_.kws_dim / 2;
        for (int k = 0; k < cfg_.context_frames; ++k) {
          ccl_real_.emplace_back();
          ccl_real_.back().init("proj.ccl.r" + std::to_string(k), in, outd, rng);
          ccl_imag_.emplace_back();
          ccl_imag_.back().init("proj.ccl.i" + std::to_string(k), in, outd, rng);
        }
        break;
      }
    }
  } else {
    mel_proj_.init("mel_proj", cfg_.mel_bins, cfg_.kws_dim, rng);
  }

  if (needs_bias) {
    if (cfg_.bias_mode == BiasMode::kLearnable) {
      learnable_bias_ = Param("bias.learnable",
                              RandnInit(rng, {static_cast<int64_t>(cfg_.bias_dim)}, 0.01));
    } else {
      bias_enc_.init(cfg_, rng);
    }
  }

  for (int b = 0; b < cfg_.dtc_blocks; ++b) {
    dtc_.emplace_back();
    dtc_.back().init("dtc.b" + std::to_string(b), cfg_.kws_dim, cfg_.dtc_kernel,
                     cfg_.dilation(b), rng);
  }
  classifier_.init("classifier", cfg_.kws_dim, 2, rng);
  cached_bias_ = Tensor({static_cast<int64_t>(cfg_.bias_dim)});
}

ParamList KwsModel::params() {
  ParamList ps;
  for (auto& l : enc_) l.collect(ps);
  if (!cfg_.kws_only && !enc_.empty()) {
    lstm_.collect(ps);
    lstm_proj_.collect(ps);
    dec_expand_.collect(ps);
    for (auto& l : dec_) l.collect(ps);
    if (cfg_.feature_merge) ps.push_back(&merge_w_);
    switch (cfg_.projection) {
      case ProjectionMode::kPlain: proj_plain_.collect(ps); break;
      case ProjectionMode::kBiasConcat: proj_bias_.collect(ps); break;
      case ProjectionMode::kContextLinear:
        for (size_t k = 0; k < ccl_real_.size(); ++k) {
          ccl_real_[k].collect(ps);
          ccl_imag_[k].collect(ps);
        }
        break;
    }
  }
  if (cfg_.kws_only) mel_proj_.collect(ps);
  if (cfg_.projection != ProjectionMode::kPlain && !cfg_.kws_only) {
    if (cfg_.bias_mode == BiasMode::kLearnable)
      ps.push_back(&learnable_bias_);
    else
      bias_enc_.collect(ps);
  }
  for (auto& b : dtc_) b.collect(ps);
  classifier_.collect(ps);
  return ps;
}

std::vector<std::pair<std::string, ag::BnState*>> KwsModel::bn_states() {
  std::vector<std::pair<std::string, ag::BnState*>> out;
  auto push = [&out](BatchNorm& bn) { out.emplace_back(bn.gamma.name, &bn.state); };
  for (auto& l : enc_) {
    push(l.bn_r);
    push(l.bn_i);
  }
  for (auto& l : dec_) {
    push(l.bn_r);
    push(l.bn_i);
  }
  if (cfg_.projection != ProjectionMode::kPlain && !cfg_.kws_only &&
      cfg_.bias_mode != BiasMode::kLearnable)
    for (auto& bn : bias_enc_.bns) push(bn);
  for (auto& b : dtc_) push(b.bn);
  return out;
}

int64_t KwsModel::param_count() {
  int64_t n = 0;
  for (Param* p : params()) n += p->value.numel();
  return n;
}

std::pair<Tensor, Tensor> KwsModel::EncoderInput(const ComplexSpectrogram& spec) {
  int64_t Fb = spec.bins(), T = spec.frames();
  int64_t F = Fb - 1;  // drop DC, keep Nyquist
  Tensor re({1, F, T}), im({1, F, T});
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = 0; t < T; ++t) {
      re.v[f * T + t] = spec.real.v[(f + 1) * T + t];
      im.v[f * T + t] = spec.imag.v[(f + 1) * T + t];
    }
  return {std::move(re), std::move(im)};
}

std::vector<CVar> KwsModel::encode(Tape& t, V spec_re, V spec_im, bool training) {
  if (t.val(spec_re).dim(1) != cfg_.freq_bins())
    throw std::invalid_argument("encode: expected F=" + std::to_string(cfg_.freq_bins()) +
                                ", got " + std::to_string(t.val(spec_re).dim(1)));
  std::vector<CVar> stack;
  CVar x{spec_re, spec_im};
  for (auto& layer : enc_) {
    x = layer.apply(t, x, training);
    stack.push_back(x);
  }
  // shape ledger
  int F = cfg_.freq_bins();
  for (int l = 0; l < cfg_.num_layers(); ++l) {
    F /= 2;
    const Tensor& v = t.val(stack[static_cast<size_t>(l)].re);
    if (v.dim(0) != cfg_.encoder_channels[static_cast<size_t>(l)] / 2 || v.dim(1) != F)
      throw std::logic_error("encode: layer " + std::to_string(l) + " shape " + v.shape_str() +
                             " violates the channel/frequency ledger");
  }
  return stack;
}

CVar KwsModel::downsample_layer(Tape& t, const CVar& layer, int index) {
  (void)index;
  V fr = flatten_cf(t, layer.re);
  V fi = flatten_cf(t, layer.im);
  int64_t d = t.val(fr).dim(1);
  if (d == cfg_.part_dim()) return {fr, fi};
  if (d == 2 * cfg_.part_dim()) return {pair_avg_cols(t, fr), pair_avg_cols(t, fi)};
  throw std::logic_error("downsample_layer: unexpected flattened dim " + std::to_string(d));
}

CVar KwsModel::feature_merge(Tape& t, const std::vector<CVar>& stack) {
  if (!cfg_.feature_merge) return downsample_layer(t, stack.back(), cfg_.num_layers() - 1);
  double wsum = 0.0;
  for (double w : merge_w_.value.v) wsum += std::fabs(w);
  if (wsum < 1e-8)
    throw std::runtime_error("feature_merge: all-zero merge weights (|w| sum below 1e-8)");
  V wnode = t.param(merge_w_);
  V denom = sum_all(t, abs_(t, wnode));
  V acc_r = -1, acc_i = -1;
  for (int l = 0; l < cfg_.num_layers(); ++l) {
    CVar d = downsample_layer(t, stack[static_cast<size_t>(l)], l);
    V wl = index_scalar(t, wnode, l);
    V tr = scale_by(t, d.re, wl);
    V ti = scale_by(t, d.im, wl);
    acc_r = l == 0 ? tr : add(t, acc_r, tr);
    acc_i = l == 0 ? ti : add(t, acc_i, ti);
  }
  return {div_by(t, acc_r, denom), div_by(t, acc_i, denom)};
}

V KwsModel::project(Tape& t, CVar merged, V bias) {
  const bool needs_bias = cfg_.projection != ProjectionMode::kPlain;
  if (needs_bias && bias < 0)
    throw std::invalid_argument("project: projection mode requires a bias embedding");
  if (!needs_bias && bias >= 0)
    throw std::invalid_argument("project: plain mode takes no bias embedding");
  int64_t T = t.val(merged.re).dim(0);
  switch (cfg_.projection) {
    case ProjectionMode::kPlain: {
      V x = concat_cols(t, {merged.re, merged.im});
      return leaky_relu(t, proj_plain_.apply(t, x), kLeakySlope);
    }
    case ProjectionMode::kBiasConcat: {
      V brow = reshape(t, bias, {static_cast<int64_t>(cfg_.bias_dim)});
      V x = concat_cols(t, {merged.re, merged.im, tile_rowvec(t, brow, T)});
      return leaky_relu(t, proj_bias_.apply(t, x), kLeakySlope);
    }
    case ProjectionMode::kContextLinear: {
      V bflat = reshape(t, bias, {static_cast<int64_t>(cfg_.bias_dim)});
      V brow = reshape(t, bflat, {1, static_cast<int64_t>(cfg_.bias_dim)});
      V b_r = reshape(t, slice_cols(t, brow, 0, cfg_.bias_dim / 2),
                      {static_cast<int64_t>(cfg_.bias_dim / 2)});
      V b_i = reshape(t, slice_cols(t, brow, cfg_.bias_dim / 2, cfg_.bias_dim),
                      {static_cast<int64_t>(cfg_.bias_dim / 2)});
      V tile_r = tile_rowvec(t, b_r, T);
      V tile_i = tile_rowvec(t, b_i, T);
      V sum_u = -1, sum_v = -1;
      for (int k = 0; k < cfg_.context_frames; ++k) {
        V xr = shift_rows(t, merged.re, k);  // zeros before utterance start
        V xi = shift_rows(t, merged.im, k);
        V u = ccl_real_[static_cast<size_t>(k)].apply(t, concat_cols(t, {xr, tile_r}));
        V v = ccl_imag_[static_cast<size_t>(k)].apply(t, concat_cols(t, {xi, tile_i}));
        sum_u = k == 0 ? u : add(t, sum_u, u);
        sum_v = k == 0 ? v : add(t, sum_v, v);
      }
      return leaky_relu(t, concat_cols(t, {sum_u, sum_v}), kLeakySlope);
    }
  }
  throw std::logic_error("project: unreachable");
}

V KwsModel::classify(Tape& t, V kws_in, bool training) {
  if (t.val(kws_in).dim(1) != cfg_.kws_dim)
    throw std::invalid_argument("classify: expected [T," + std::to_string(cfg_.kws_dim) + "]");
  V x = transpose(t, kws_in);  // [C, T]
  for (auto& block : dtc_) x = block.apply(t, x, training);
  V logits = classifier_.apply(t, transpose(t, x));  // [T, 2]
  V diff = sub(t, slice_cols(t, logits, 1, 2), slice_cols(t, logits, 0, 1));
  V post = sigmoid(t, diff);  // two-class softmax, keyword-class probability
  return reshape(t, post, {t.val(post).dim(0)});
}

CVar KwsModel::enhance_mask(Tape& t, const std::vector<CVar>& stack, bool training) {
  if (!training)
    throw std::logic_error("enhance_mask: decoder is absent from the inference graph");
  const CVar& top = stack.back();
  int64_t T = t.val(top.re).dim(2);
  // bottleneck: flatten -> complex LSTM -> projection -> expand -> unflatten
  V fr = flatten_cf(t, top.re);
  V fi = flatten_cf(t, top.im);
  CVar h = lstm_.run(t, {fr, fi});
  h = lstm_proj_.apply(t, h);
  h = dec_expand_.apply(t, h);
  CVar x{unflatten_cf(t, h.re, cfg_.final_pairs(), cfg_.final_freq()),
         unflatten_cf(t, h.im, cfg_.final_pairs(), cfg_.final_freq())};
  for (size_t j = 0; j < dec_.size(); ++j) {
    const CVar& skip = stack[stack.size() - 1 - j];
    CVar cat{concat_chan(t, x.re, skip.re), concat_chan(t, x.im, skip.im)};
    x = dec_[j].apply(t, cat, training);
  }
  const Tensor& m = t.val(x.re);
  if (m.dim(0) != 1 || m.dim(1) != cfg_.freq_bins() || m.dim(2) != T)
    throw std::logic_error("enhance_mask: mask shape " + m.shape_str() + " violates the ledger");
  return x;
}

ForwardResult KwsModel::forward(Tape& t, const ComplexSpectrogram& noisy, V bias, bool training,
                                const StftPlan* plan) {
  if (cfg_.kws_only)
    throw std::logic_error("forward: model was built in kws_only mode; use forward_kws_only");
  auto [re, im] = EncoderInput(noisy);
  ForwardResult r;
  V xr = t.leaf(std::move(re));
  V xi = t.leaf(std::move(im));
  r.enc_stack = encode(t, xr, xi, training);
  r.merged = feature_merge(t, r.enc_stack);
  r.kws_in = project(t, r.merged, bias);
  r.posteriors = classify(t, r.kws_in, training);
  if (training) {
    if (!plan) throw std::invalid_argument("forward: training mode needs an StftPlan");
    r.mask = enhance_mask(t, r.enc_stack, training);
    int64_t F = cfg_.freq_bins(), T = noisy.frames();
    // noisy spectrogram without DC, as constants
    Tensor sr({F, T}), si({F, T});
    for (int64_t f = 0; f < F; ++f)
      for (int64_t tt = 0; tt < T; ++tt) {
        sr.v[f * T + tt] = noisy.real.v[(f + 1) * T + tt];
        si.v[f * T + tt] = noisy.imag.v[(f + 1) * T + tt];
      }
    V mr = reshape(t, r.mask.re, {F, T});
    V mi = reshape(t, r.mask.im, {F, T});
    // complex multiplicative mask
    V er = sub(t, mul_const(t, mr, sr), mul_const(t, mi, si));
    V ei = add(t, mul_const(t, mr, si), mul_const(t, mi, sr));
    r.enhanced = plan->istft_op(t, prepend_zero_row(t, er), prepend_zero_row(t, ei));
  }
  return r;
}

V KwsModel::forward_kws_only(Tape& t, const Tensor& logmel, bool training) {
  if (!cfg_.kws_only) throw std::logic_error("forward_kws_only: model not in kws_only mode");
  V mel = t.leaf(logmel);                 // [M, T]
  V frames = transpose(t, mel);           // [T, M]
  V kws_in = leaky_relu(t, mel_proj_.apply(t, frames), kLeakySlope);
  return classify(t, kws_in, training);
}

V KwsModel::extract_embedding(Tape& t, const AudioBuffer& audio, bool training) {
  if (audio.duration_s() < 0.5)
    throw std::invalid_argument("extract_embedding: audio shorter than 0.5 s");
  Tensor mel = LogMel(audio, cfg_.mel_bins, cfg_.spectro);
  return bias_enc_.embed(t, t.leaf(std::move(mel)), training);
}

Tensor KwsModel::compute_bias_embedding(const std::vector<AudioBuffer>& clips) {
  if (cfg_.bias_mode == BiasMode::kLearnable) return learnable_bias_.value;
  if (clips.empty())
    throw std::invalid_argument("compute_bias_embedding: empty bias list");
  Tensor mean({static_cast<int64_t>(cfg_.bias_dim)});
  for (const AudioBuffer& a : clips) {
    Tape t;
    V e = extract_embedding(t, a, false);
    const Tensor& v = t.val(e);
    for (int64_t i = 0; i < mean.numel(); ++i) mean.v[i] += v.v[i];
  }
  for (double& x : mean.v) x /= static_cast<double>(clips.size());
  return mean;
}

void KwsModel::set_cached_bias(Tensor e) {
  if (e.numel() != cfg_.bias_dim)
    throw std::invalid_argument("set_cached_bias: dimension mismatch");
  cached_bias_ = std::move(e);
  has_cached_bias_ = true;
}

V KwsModel::resolve_bias(Tape& t, const std::vector<AudioBuffer>& clips, bool training) {
  if (cfg_.projection == ProjectionMode::kPlain) return -1;
  if (cfg_.bias_mode == BiasMode::kLearnable)
    return reshape(t, t.param(learnable_bias_), {1, static_cast<int64_t>(cfg_.bias_dim)});
  if (!training) {
    if (!has_cached_bias_) set_cached_bias(compute_bias_embedding(clips));
    return t.leaf(Tensor({1, static_cast<int64_t>(cfg_.bias_dim)}, cached_bias_.v));
  }
  if (clips.empty()) throw std::invalid_argument("resolve_bias: empty bias list");
  V acc = -1;
  for (const AudioBuffer& a : clips) {
    V e = extract_embedding(t, a, training);
    acc = acc < 0 ? e : add(t, acc, e);
  }
  return affine(t, acc, 1.0 / static_cast<double>(clips.size()), 0.0);
}

std::vector<double> KwsModel::merge_weights() const {
  if (cfg_.feature_merge) return merge_w_.value.v;
  std::vector<double> w(static_cast<size_t>(cfg_.num_layers()), 0.0);
  w.back() = 1.0;
  return w;
}

int64_t KwsModel::projection_weight_count() {
  switch (cfg_.projection) {
    case ProjectionMode::kPlain: return proj_plain_.weight_count();
    case ProjectionMode::kBiasConcat: return proj_bias_.weight_count();
    case ProjectionMode::kContextLinear: {
      int64_t n = 0;
      for (auto& l : ccl_real_) n += l.weight_count();
      for (auto& l : ccl_imag_) n += l.weight_count();
      return n;
    }
  }
  return 0;
}

std::vector<double> FrameEnergy(const Tensor& re, const Tensor& im) {
  if (!re.same_shape(im) || re.ndim() != 3)
    throw std::invalid_argument("FrameEnergy: need matching [C,F,T] pair");
  int64_t C = re.dim(0), F = re.dim(1), T = re.dim(2);
  std::vector<double> m(static_cast<size_t>(T), 0.0);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t t = 0; t < T; ++t) {
        double r = re.v[(c * F + f) * T + t], i = im.v[(c * F + f) * T + t];
        m[static_cast<size_t>(t)] += std::sqrt(r * r + i * i);
      }
  return m;
}

}  // namespace dkws

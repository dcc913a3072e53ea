// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/streaming.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace dkws {

namespace {

double leaky(double x) { return x >= 0.0 ? x : kLeakySlope * x; }
double sigmoid_s(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-channel eval-mode affine of a batchnorm layer.
struct BnAffine {
  std::vector<double> scale, shift;
  void build(const BatchNorm& bn) {
    int64_t C = bn.gamma.value.numel();
    scale.resize(static_cast<size_t>(C));
    shift.resize(static_cast<size_t>(C));
    for (int64_t c = 0; c < C; ++c) {
      double inv = 1.0 / std::sqrt(bn.state.running_var.v[c] + bn.state.eps);
      scale[c] = bn.gamma.value.v[c] * inv;
      shift[c] = bn.beta.value.v[c] - bn.gamma.value.v[c] * bn.state.running_mean.v[c] * inv;
    }
  }
};

}  // namespace

std::vector<double> SmoothScores(const std::vector<double>& post, int win) {
  if (win < 1) throw std::invalid_argument("SmoothScores: win >= 1");
  std::vector<double> out(post.size());
  double acc = 0.0;
  for (size_t t = 0; t < post.size(); ++t) {
    acc += post[t];
    if (t >= static_cast<size_t>(win)) acc -= post[t - static_cast<size_t>(win)];
    size_t span = std::min(t + 1, static_cast<size_t>(win));
    out[t] = acc / static_cast<double>(span);
  }
  return out;
}

std::vector<Detection> SmoothAndDecide(const std::vector<double>& post, double threshold,
                                       int smooth_win, int refractory) {
  if (refractory < 1) throw std::invalid_argument("SmoothAndDecide: refractory >= 1");
  std::vector<double> s = SmoothScores(post, smooth_win);
  std::vector<Detection> out;
  int64_t last = -static_cast<int64_t>(refractory);
  for (size_t t = 0; t < s.size(); ++t) {
    if (s[t] >= threshold && static_cast<int64_t>(t) - last >= refractory) {
      out.push_back({static_cast<int64_t>(t), s[t], threshold});
      last = static_cast<int64_t>(t);
    }
  }
  return out;
}

StreamingRunner::StreamingRunner(KwsModel& model)
    : model_(model), plan_(model.config().spectro, model.config().sample_rate) {
  const ModelConfig& cfg = model_.config();
  if (cfg.kws_only) mel_fb_ = MelFilterbank(cfg.mel_bins, plan_.fft(), cfg.sample_rate);
  reset();
}

void StreamingRunner::reset() {
  const ModelConfig& cfg = model_.config();
  pending_.clear();
  pending_off_ = 0;
  frame_count_ = 0;

  if (cfg.projection != ProjectionMode::kPlain && !cfg.kws_only) {
    if (cfg.bias_mode == BiasMode::kLearnable) {
      bias_ = model_.learnable_bias_.value.v;
    } else {
      if (!model_.has_cached_bias())
        throw std::logic_error(
            "StreamingRunner: no cached bias embedding; compute one from a bias list first");
      bias_ = model_.cached_bias_.v;
    }
  } else {
    bias_.clear();
  }

  merge_norm_.assign(static_cast<size_t>(cfg.num_layers()), 0.0);
  if (!cfg.kws_only) {
    std::vector<double> w = model_.merge_weights();
    double wsum = 0.0;
    for (double x : w) wsum += std::fabs(x);
    if (wsum < 1e-8)
      throw std::runtime_error("StreamingRunner: all-zero merge weights (|w| sum below 1e-8)");
    for (size_t l = 0; l < w.size(); ++l) merge_norm_[l] = w[l] / wsum;

    prev_re_.clear();
    prev_im_.clear();
    int64_t in_pairs = 1, F = cfg.freq_bins();
    for (auto& layer : model_.enc_) {
      prev_re_.emplace_back(static_cast<size_t>(in_pairs * F), 0.0);
      prev_im_.emplace_back(static_cast<size_t>(in_pairs * F), 0.0);
      in_pairs = layer.Wr.value.dim(0);
      F /= 2;
    }
    hist_er_.assign(static_cast<size_t>(cfg.context_frames - 1),
                    std::vector<double>(static_cast<size_t>(cfg.part_dim()), 0.0));
    hist_ei_ = hist_er_;
  }

  dtc_hist_.clear();
  dtc_span_.clear();
  for (auto& block : model_.dtc_) {
    int span = (cfg.dtc_kernel - 1) * block.dw.dilation + 1;
    dtc_span_.push_back(span);
    dtc_hist_.emplace_back(static_cast<size_t>(span) * static_cast<size_t>(cfg.kws_dim), 0.0);
  }
}

std::vector<double> StreamingRunner::push(const AudioBuffer& audio) {
  if (audio.sample_rate != model_.config().sample_rate)
    throw std::invalid_argument("StreamingRunner: sample rate mismatch");
  return push(audio.samples.data(), audio.samples.size());
}

std::vector<double> StreamingRunner::push(const double* samples, size_t n) {
  pending_.insert(pending_.end(), samples, samples + n);
  std::vector<double> out;
  const size_t win = static_cast<size_t>(plan_.win());
  const size_t hop = static_cast<size_t>(plan_.hop());
  while (pending_off_ + win <= pending_.size()) {
    out.push_back(process_frame(pending_, pending_off_));
    pending_off_ += hop;
    ++frame_count_;
  }
  if (pending_off_ > 8 * win) {
    pending_.erase(pending_.begin(), pending_.begin() + static_cast<int64_t>(pending_off_));
    pending_off_ = 0;
  }
  return out;
}

void StreamingRunner::merged_column(const std::vector<std::vector<double>>& layer_re,
                                    const std::vector<std::vector<double>>& layer_im,
                                    std::vector<double>& er, std::vector<double>& ei) {
  const size_t P = static_cast<size_t>(model_.config().part_dim());
  er.assign(P, 0.0);
  ei.assign(P, 0.0);
  for (size_t l = 0; l < layer_re.size(); ++l) {
    double w = merge_norm_[l];
    if (w == 0.0) continue;
    const std::vector<double>& fr = layer_re[l];
    const std::vector<double>& fi = layer_im[l];
    if (fr.size() == P) {
      for (size_t j = 0; j < P; ++j) {
        er[j] += w * fr[j];
        ei[j] += w * fi[j];
      }
    } else if (fr.size() == 2 * P) {
      for (size_t j = 0; j < P; ++j) {
        er[j] += w * 0.5 * (fr[2 * j] + fr[2 * j + 1]);
        ei[j] += w * 0.5 * (fi[2 * j] + fi[2 * j + 1]);
      }
    } else {
      throw std::logic_error("StreamingRunner: unexpected flattened layer size");
    }
  }
}

std::vector<double> StreamingRunner::project_column(const std::vector<double>& er,
                                                    const std::vector<double>& ei) {
  const ModelConfig& cfg = model_.config();
  const size_t D = static_cast<size_t>(cfg.kws_dim);
  std::vector<double> out(D, 0.0);
  auto apply_linear = [](const Linear& lin, const std::vector<double>& x,
                         std::vector<double>& y) {
    const Tensor& W = lin.W.value;
    int64_t in = W.dim(0), outd = W.dim(1);
    if (static_cast<int64_t>(x.size()) != in)
      throw std::logic_error("StreamingRunner: projection input dim mismatch");
    for (int64_t j = 0; j < outd; ++j) y[static_cast<size_t>(j)] = lin.b.value.v[j];
    for (int64_t i = 0; i < in; ++i) {
      double xv = x[static_cast<size_t>(i)];
      if (xv == 0.0) continue;
      const double* wrow = &W.v[static_cast<size_t>(i * outd)];
      for (int64_t j = 0; j < outd; ++j) y[static_cast<size_t>(j)] += xv * wrow[j];
    }
  };

  switch (cfg.projection) {
    case ProjectionMode::kPlain: {
      std::vector<double> x(er);
      x.insert(x.end(), ei.begin(), ei.end());
      apply_linear(model_.proj_plain_, x, out);
      break;
    }
    case ProjectionMode::kBiasConcat: {
      std::vector<double> x(er);
      x.insert(x.end(), ei.begin(), ei.end());
      x.insert(x.end(), bias_.begin(), bias_.end());
      apply_linear(model_.proj_bias_, x, out);
      break;
    }
    case ProjectionMode::kContextLinear: {
      const size_t half = bias_.size() / 2;
      std::vector<double> u(D / 2, 0.0), v(D / 2, 0.0), tmp(D / 2, 0.0);
      for (int k = 0; k < cfg.context_frames; ++k) {
        const std::vector<double>& xr =
            k == 0 ? er : hist_er_[static_cast<size_t>(k - 1)];
        const std::vector<double>& xi =
            k == 0 ? ei : hist_ei_[static_cast<size_t>(k - 1)];
        std::vector<double> cat_r(xr);
        cat_r.insert(cat_r.end(), bias_.begin(), bias_.begin() + static_cast<int64_t>(half));
        apply_linear(model_.ccl_real_[static_cast<size_t>(k)], cat_r, tmp);
        for (size_t j = 0; j < u.size(); ++j) u[j] += tmp[j];
        std::vector<double> cat_i(xi);
        cat_i.insert(cat_i.end(), bias_.begin() + static_cast<int64_t>(half), bias_.end());
        apply_linear(model_.ccl_imag_[static_cast<size_t>(k)], cat_i, tmp);
        for (size_t j = 0; j < v.size(); ++j) v[j] += tmp[j];
      }
      std::copy(u.begin(), u.end(), out.begin());
      std::copy(v.begin(), v.end(), out.begin() + static_cast<int64_t>(D / 2));
      break;
    }
  }
  for (double& x : out) x = leaky(x);

  // roll the merged-feature context window
  if (!hist_er_.empty()) {
    for (size_t k = hist_er_.size(); k > 1; --k) {
      hist_er_[k - 1] = hist_er_[k - 2];
      hist_ei_[k - 1] = hist_ei_[k - 2];
    }
    hist_er_[0] = er;
    hist_ei_[0] = ei;
  }
  return out;
}

double StreamingRunner::classify_column(std::vector<double> col) {
  const ModelConfig& cfg = model_.config();
  const int64_t C = cfg.kws_dim;
  const int64_t k = cfg.dtc_kernel;
  for (size_t bidx = 0; bidx < model_.dtc_.size(); ++bidx) {
    DtcBlock& block = model_.dtc_[bidx];
    const int span = dtc_span_[bidx];
    std::vector<double>& hist = dtc_hist_[bidx];
    const int64_t slot = frame_count_ % span;
    std::copy(col.begin(), col.end(),
              hist.begin() + static_cast<int64_t>(slot) * C);

    BnAffine bn;
    bn.build(block.bn);
    const Tensor& dw = block.dw.W.value;
    const int dil = block.dw.dilation;
    std::vector<double> h(static_cast<size_t>(C), 0.0);
    for (int64_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int64_t b = 0; b < k; ++b) {
        int64_t src = frame_count_ - b * dil;
        if (src < 0) continue;
        int64_t s = src % span;
        acc += dw.v[c * k + b] * hist[static_cast<size_t>(s * C + c)];
      }
      h[static_cast<size_t>(c)] = leaky(bn.scale[c] * acc + bn.shift[c]);
    }
    std::vector<double> h2(static_cast<size_t>(C));
    for (int64_t o = 0; o < C; ++o) {
      double acc = block.pw1_b.value.v[o];
      const double* wrow = &block.pw1_W.value.v[static_cast<size_t>(o * C)];
      for (int64_t c = 0; c < C; ++c) acc += wrow[c] * h[static_cast<size_t>(c)];
      h2[static_cast<size_t>(o)] = leaky(acc);
    }
    for (int64_t o = 0; o < C; ++o) {
      double acc = block.pw2_b.value.v[o];
      const double* wrow = &block.pw2_W.value.v[static_cast<size_t>(o * C)];
      for (int64_t c = 0; c < C; ++c) acc += wrow[c] * h2[static_cast<size_t>(c)];
      col[static_cast<size_t>(o)] += acc;  // residual
    }
  }
  const Tensor& W = model_.classifier_.W.value;
  const Tensor& b = model_.classifier_.b.value;
  double l0 = b.v[0], l1 = b.v[1];
  for (int64_t c = 0; c < C; ++c) {
    l0 += col[static_cast<size_t>(c)] * W.v[c * 2 + 0];
    l1 += col[static_cast<size_t>(c)] * W.v[c * 2 + 1];
  }
  return sigmoid_s(l1 - l0);
}

double StreamingRunner::process_frame(const std::vector<double>& samples, size_t offset) {
  const ModelConfig& cfg = model_.config();
  const int win = plan_.win(), fft = plan_.fft();
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft), {0.0, 0.0});
  const std::vector<double>& w = plan_.window();
  for (int n = 0; n < win; ++n)
    buf[static_cast<size_t>(n)] = samples[offset + static_cast<size_t>(n)] * w[static_cast<size_t>(n)];
  Fft(buf, false);

  if (cfg.kws_only) {
    const int64_t Fb = fft / 2 + 1;
    std::vector<double> mel(static_cast<size_t>(cfg.mel_bins));
    for (int m = 0; m < cfg.mel_bins; ++m) {
      double acc = 0.0;
      for (int64_t kbin = 0; kbin < Fb; ++kbin)
        acc += mel_fb_.v[m * Fb + kbin] * std::norm(buf[static_cast<size_t>(kbin)]);
      mel[static_cast<size_t>(m)] = std::log(std::max(acc, 1e-10));
    }
    const Tensor& W = model_.mel_proj_.W.value;
    std::vector<double> col(static_cast<size_t>(cfg.kws_dim));
    for (int64_t j = 0; j < cfg.kws_dim; ++j) {
      double acc = model_.mel_proj_.b.value.v[j];
      for (int m = 0; m < cfg.mel_bins; ++m)
        acc += mel[static_cast<size_t>(m)] * W.v[m * cfg.kws_dim + j];
      col[static_cast<size_t>(j)] = leaky(acc);
    }
    return classify_column(std::move(col));
  }

  const int64_t F = cfg.freq_bins();
  std::vector<double> re(static_cast<size_t>(F)), im(static_cast<size_t>(F));
  for (int64_t f = 0; f < F; ++f) {  // DC dropped, Nyquist kept
    re[static_cast<size_t>(f)] = buf[static_cast<size_t>(f + 1)].real();
    im[static_cast<size_t>(f)] = buf[static_cast<size_t>(f + 1)].imag();
  }

  // run the encoder, keeping every layer column for the merge
  std::vector<std::vector<double>> layer_re, layer_im;
  layer_re.reserve(model_.enc_.size());
  layer_im.reserve(model_.enc_.size());
  {
    std::vector<double> cr = std::move(re), ci = std::move(im);
    int64_t Fi = F;
    for (size_t l = 0; l < model_.enc_.size(); ++l) {
      ComplexConv2d& layer = model_.enc_[l];
      const Tensor& Wr = layer.Wr.value;
      const Tensor& Wi = layer.Wi.value;
      int64_t Co = Wr.dim(0), Ci = Wr.dim(1), kf = Wr.dim(2), kt = Wr.dim(3);
      int64_t pad = layer.pad_f, stride = layer.stride_f;
      int64_t Fo = (Fi + 2 * pad - kf) / stride + 1;
      BnAffine bn_r, bn_i;
      bn_r.build(layer.bn_r);
      bn_i.build(layer.bn_i);
      std::vector<double> yr(static_cast<size_t>(Co * Fo), 0.0), yi = yr;
      for (int64_t o = 0; o < Co; ++o)
        for (int64_t gf = 0; gf < Fo; ++gf) {
          double vr = layer.br.value.v[o], vi = layer.bi.value.v[o];
          for (int64_t c = 0; c < Ci; ++c)
            for (int64_t a = 0; a < kf; ++a) {
              int64_t f = gf * stride + a - pad;
              if (f < 0 || f >= Fi) continue;
              size_t idx = static_cast<size_t>(c * Fi + f);
              for (int64_t b = 0; b < kt; ++b) {
                // tap b frames into the past (b = 0 is the current frame)
                double xr = b == 0 ? cr[idx] : prev_re_[l][idx];
                double xim = b == 0 ? ci[idx] : prev_im_[l][idx];
                double wr = Wr.v[((o * Ci + c) * kf + a) * kt + b];
                double wi = Wi.v[((o * Ci + c) * kf + a) * kt + b];
                vr += wr * xr - wi * xim;
                vi += wi * xr + wr * xim;
              }
            }
          if (layer.norm_act) {
            vr = leaky(bn_r.scale[o] * vr + bn_r.shift[o]);
            vi = leaky(bn_i.scale[o] * vi + bn_i.shift[o]);
          }
          yr[static_cast<size_t>(o * Fo + gf)] = vr;
          yi[static_cast<size_t>(o * Fo + gf)] = vi;
        }
      prev_re_[l] = std::move(cr);
      prev_im_[l] = std::move(ci);
      cr = std::move(yr);
      ci = std::move(yi);
      layer_re.push_back(cr);
      layer_im.push_back(ci);
      Fi = Fo;
    }
  }

  std::vector<double> er, ei;
  merged_column(layer_re, layer_im, er, ei);
  std::vector<double> col = project_column(er, ei);
  return classify_column(std::move(col));
}

}  // namespace dkws

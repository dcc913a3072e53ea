// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/dsp.hpp"

#include <cmath>
#include <stdexcept>

namespace dkws {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kReconEps = 1e-6;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }
}  // namespace

void Fft(std::vector<std::complex<double>>& x, bool inverse) {
  const size_t n = x.size();
  if (!is_pow2(static_cast<int>(n))) throw std::invalid_argument("Fft: size must be a power of two");
  // bit reversal
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = x[i + k];
        std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& c : x) c /= static_cast<double>(n);
}

StftPlan::StftPlan(const SpectroConfig& cfg, int sample_rate)
    : win_(cfg.win(sample_rate)),
      hop_(cfg.hop(sample_rate)),
      fft_(cfg.fft_size),
      rate_(sample_rate) {
  if (sample_rate <= 0) throw std::invalid_argument("StftPlan: sample rate must be > 0");
  if (!is_pow2(fft_)) throw std::invalid_argument("StftPlan: fft_size must be a power of two");
  if (win_ > fft_)
    throw std::invalid_argument("StftPlan: window (" + std::to_string(win_) +
                                ") exceeds fft_size (" + std::to_string(fft_) + ")");
  if (hop_ <= 0 || hop_ > win_) throw std::invalid_argument("StftPlan: need 0 < hop <= win");

  window_.resize(static_cast<size_t>(win_));
  if (cfg.window == "sqrt_hann") {
    for (int n = 0; n < win_; ++n) {
      double h = 0.5 - 0.5 * std::cos(2.0 * kPi * n / win_);  // periodic Hann
      window_[n] = std::sqrt(h);
    }
  } else if (cfg.window == "hann") {
    for (int n = 0; n < win_; ++n)
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / win_);
  } else {
    throw std::invalid_argument("StftPlan: unknown window family '" + cfg.window + "'");
  }

  // Perfect-reconstruction check: overlap-added squared window must not
  // vanish on interior samples.
  std::vector<double> wsum(static_cast<size_t>(win_ + 4 * hop_), 0.0);
  for (int t = 0; t * hop_ < static_cast<int>(wsum.size()); ++t)
    for (int n = 0; n < win_; ++n) {
      size_t idx = static_cast<size_t>(t * hop_ + n);
      if (idx < wsum.size()) wsum[idx] += window_[n] * window_[n];
    }
  for (int n = win_; n < win_ + 2 * hop_; ++n)
    if (wsum[static_cast<size_t>(n)] < kReconEps)
      throw std::invalid_argument(
          "StftPlan: window/hop pair violates the perfect-reconstruction constraint");
}

int64_t StftPlan::num_frames(size_t n_samples) const {
  if (static_cast<int>(n_samples) < win_)
    throw std::invalid_argument("StftPlan: audio shorter than one window (" +
                                std::to_string(n_samples) + " < " + std::to_string(win_) + ")");
  return 1 + static_cast<int64_t>((n_samples - static_cast<size_t>(win_)) / static_cast<size_t>(hop_));
}

ComplexSpectrogram StftPlan::stft(const AudioBuffer& audio) const {
  audio.validate();
  if (audio.sample_rate != rate_)
    throw std::invalid_argument("StftPlan::stft: sample rate mismatch");
  int64_t T = num_frames(audio.size());
  int64_t Fb = bins();
  ComplexSpectrogram s;
  s.real = Tensor({Fb, T});
  s.imag = Tensor({Fb, T});
  s.sample_rate = rate_;
  s.win = win_;
  s.hop = hop_;
  s.fft = fft_;
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_));
  for (int64_t t = 0; t < T; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    size_t off = static_cast<size_t>(t) * static_cast<size_t>(hop_);
    for (int n = 0; n < win_; ++n)
      buf[static_cast<size_t>(n)] = audio.samples[off + static_cast<size_t>(n)] * window_[n];
    Fft(buf, false);
    for (int64_t k = 0; k < Fb; ++k) {
      s.real.v[k * T + t] = buf[static_cast<size_t>(k)].real();
      s.imag.v[k * T + t] = buf[static_cast<size_t>(k)].imag();
    }
  }
  return s;
}

std::vector<double> StftPlan::window_norm(int64_t frames) const {
  std::vector<double> wsum(num_samples(frames), 0.0);
  for (int64_t t = 0; t < frames; ++t)
    for (int n = 0; n < win_; ++n)
      wsum[static_cast<size_t>(t * hop_ + n)] += window_[n] * window_[n];
  for (double& x : wsum) x = std::max(x, kReconEps);
  return wsum;
}

AudioBuffer StftPlan::istft(const ComplexSpectrogram& spec) const {
  if (spec.bins() != bins())
    throw std::invalid_argument("StftPlan::istft: bin count mismatch");
  int64_t T = spec.frames();
  std::vector<double> y(num_samples(T), 0.0);
  std::vector<double> wsum = window_norm(T);
  std::vector<std::complex<double>> buf(static_cast<size_t>(fft_));
  int64_t Fb = bins();
  for (int64_t t = 0; t < T; ++t) {
    buf[0] = std::complex<double>(spec.real.v[0 * T + t], 0.0);
    buf[static_cast<size_t>(fft_ / 2)] =
        std::complex<double>(spec.real.v[(Fb - 1) * T + t], 0.0);
    for (int64_t k = 1; k < Fb - 1; ++k) {
      std::complex<double> c(spec.real.v[k * T + t], spec.imag.v[k * T + t]);
      buf[static_cast<size_t>(k)] = c;
      buf[static_cast<size_t>(fft_ - k)] = std::conj(c);
    }
    Fft(buf, true);
    for (int n = 0; n < win_; ++n)
      y[static_cast<size_t>(t * hop_ + n)] += window_[n] * buf[static_cast<size_t>(n)].real();
  }
  for (size_t n = 0; n < y.size(); ++n) y[n] /= wsum[n];
  return AudioBuffer(std::move(y), rate_);
}

void StftPlan::ensure_tables() const {
  if (!cos_tab_.empty()) return;
  int64_t Fb = bins();
  cos_tab_.resize(static_cast<size_t>(Fb * win_));
  sin_tab_.resize(static_cast<size_t>(Fb * win_));
  for (int64_t k = 0; k < Fb; ++k)
    for (int n = 0; n < win_; ++n) {
      double a = 2.0 * kPi * static_cast<double>(k) * n / fft_;
      cos_tab_[static_cast<size_t>(k * win_ + n)] = std::cos(a);
      sin_tab_[static_cast<size_t>(k * win_ + n)] = std::sin(a);
    }
}

V StftPlan::istft_op(Tape& t, V re, V im) const {
  const Tensor& R = t.val(re);
  const Tensor& I = t.val(im);
  if (R.ndim() != 2 || !R.same_shape(I) || R.dim(0) != bins())
    throw std::invalid_argument("istft_op: need [bins x T] real/imag pair");
  ensure_tables();
  int64_t Fb = bins(), T = R.dim(1);
  std::vector<double> wsum = window_norm(T);
  std::vector<double> y(num_samples(T), 0.0);
  double invN = 1.0 / fft_;
  for (int64_t tt = 0; tt < T; ++tt) {
    for (int n = 0; n < win_; ++n) {
      double acc = 0.0;
      for (int64_t k = 0; k < Fb; ++k) {
        double ck = (k == 0 || k == Fb - 1) ? 1.0 : 2.0;
        acc += ck * R.v[k * T + tt] * cos_tab_[static_cast<size_t>(k * win_ + n)];
        if (k != 0 && k != Fb - 1)
          acc -= 2.0 * I.v[k * T + tt] * sin_tab_[static_cast<size_t>(k * win_ + n)];
      }
      y[static_cast<size_t>(tt * hop_ + n)] += window_[n] * acc * invN;
    }
  }
  for (size_t n = 0; n < y.size(); ++n) y[n] /= wsum[n];

  int64_t out_len = static_cast<int64_t>(y.size());
  Tensor out({out_len}, std::move(y));
  int64_t win = win_, hop = hop_;
  const std::vector<double>* ct = &cos_tab_;
  const std::vector<double>* st = &sin_tab_;
  std::vector<double> wn = window_;
  return t.make(std::move(out), [re, im, Fb, T, win, hop, invN, ct, st, wn,
                                 wsum](Tape& tp, V self) {
    const Tensor& g = tp.grad(self);
    Tensor& gr = tp.grad(re);
    Tensor& gi = tp.grad(im);
    for (int64_t tt = 0; tt < T; ++tt) {
      for (int n = 0; n < win; ++n) {
        size_t idx = static_cast<size_t>(tt * hop + n);
        double gf = g.v[idx] / wsum[idx] * wn[static_cast<size_t>(n)] * invN;
        if (gf == 0.0) continue;
        for (int64_t k = 0; k < Fb; ++k) {
          double ck = (k == 0 || k == Fb - 1) ? 1.0 : 2.0;
          gr.v[k * T + tt] += gf * ck * (*ct)[static_cast<size_t>(k * win + n)];
          if (k != 0 && k != Fb - 1)
            gi.v[k * T + tt] -= gf * 2.0 * (*st)[static_cast<size_t>(k * win + n)];
        }
      }
    }
  });
}

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

Tensor MelFilterbank(int n_mels, int fft_size, int sample_rate) {
  if (n_mels <= 0) throw std::invalid_argument("MelFilterbank: n_mels must be > 0");
  int64_t Fb = fft_size / 2 + 1;
  // area-normalized triangular filters on the mel scale
  double nyq = sample_rate / 2.0;
  double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(nyq);
  std::vector<double> centers(static_cast<size_t>(n_mels + 2));
  for (int m = 0; m < n_mels + 2; ++m)
    centers[static_cast<size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1));

  Tensor fb({static_cast<int64_t>(n_mels), Fb});
  double bin_hz = static_cast<double>(sample_rate) / fft_size;
  for (int m = 0; m < n_mels; ++m) {
    double lo = centers[static_cast<size_t>(m)], c = centers[static_cast<size_t>(m + 1)],
           hi = centers[static_cast<size_t>(m + 2)];
    double norm = 2.0 / (hi - lo);
    for (int64_t k = 0; k < Fb; ++k) {
      double f = k * bin_hz;
      double wgt = 0.0;
      if (f > lo && f < c)
        wgt = (f - lo) / (c - lo);
      else if (f >= c && f < hi)
        wgt = (hi - f) / (hi - c);
      fb.v[m * Fb + k] = wgt * norm;
    }
  }
  return fb;
}

Tensor LogMel(const AudioBuffer& audio, int n_mels, const SpectroConfig& cfg) {
  if (n_mels <= 0) throw std::invalid_argument("LogMel: n_mels must be > 0");
  StftPlan plan(cfg, audio.sample_rate);
  ComplexSpectrogram spec = plan.stft(audio);
  int64_t Fb = spec.bins(), T = spec.frames();
  Tensor fb = MelFilterbank(n_mels, plan.fft(), audio.sample_rate);

  Tensor out({static_cast<int64_t>(n_mels), T});
  for (int m = 0; m < n_mels; ++m)
    for (int64_t t = 0; t < T; ++t) {
      double acc = 0.0;
      for (int64_t k = 0; k < Fb; ++k) {
        double pr = spec.real.v[k * T + t], pi = spec.imag.v[k * T + t];
        acc += fb.v[m * Fb + k] * (pr * pr + pi * pi);
      }
      out.v[m * T + t] = std::log(std::max(acc, 1e-10));
    }
  return out;
}

}  // namespace dkws

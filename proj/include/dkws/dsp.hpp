// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_DSP_HPP_
#define DKWS_DSP_HPP_

#include <complex>
#include <string>
#include <vector>

#include "dkws/audio.hpp"
#include "dkws/autograd.hpp"
#include "dkws/tensor.hpp"

namespace dkws {

struct SpectroConfig {
  double win_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  std::string window = "sqrt_hann";
  // Explicit sample counts override the ms-derived values when nonzero
  // (used by reduced test configs whose window would not fit the FFT).
  int win_samples = 0;
  int hop_samples = 0;

  int win(int rate) const {
    return win_samples ? win_samples : static_cast<int>(win_ms * rate / 1000.0 + 0.5);
  }
  int hop(int rate) const {
    return hop_samples ? hop_samples : static_cast<int>(hop_ms * rate / 1000.0 + 0.5);
  }
};

// Complex time-frequency representation, [F_bins x T] with F_bins = fft/2 + 1.
// No look-ahead padding: frame t covers samples [t*hop, t*hop + win).
struct ComplexSpectrogram {
  Tensor real;  // [F_bins, T]
  Tensor imag;
  int sample_rate = 0;
  int win = 0, hop = 0, fft = 0;
  std::string padding = "none";

  int64_t bins() const { return real.dim(0); }
  int64_t frames() const { return real.dim(1); }
};

// Precomputed window/transform tables for one (config, rate) pair.
// Construction validates the perfect-reconstruction constraint.
class StftPlan {
 public:
  StftPlan(const SpectroConfig& cfg, int sample_rate);

  int win() const { return win_; }
  int hop() const { return hop_; }
  int fft() const { return fft_; }
  int bins() const { return fft_ / 2 + 1; }
  int sample_rate() const { return rate_; }
  const std::vector<double>& window() const { return window_; }

  int64_t num_frames(size_t n_samples) const;  // throws if shorter than one window
  size_t num_samples(int64_t frames) const { return static_cast<size_t>(frames - 1) * hop_ + win_; }

  ComplexSpectrogram stft(const AudioBuffer& audio) const;
  AudioBuffer istft(const ComplexSpectrogram& spec) const;

  // Differentiable synthesis: (re, im) are [bins x T] tape nodes; result is the
  // reconstructed waveform node of length num_samples(T). The imaginary parts
  // of the DC and Nyquist bins are ignored (zero gradient).
  V istft_op(Tape& t, V re, V im) const;

  // Overlap-add window-square normalization for a given frame count.
  std::vector<double> window_norm(int64_t frames) const;

 private:
  int win_, hop_, fft_, rate_;
  std::vector<double> window_;
  // inverse-transform basis, built on demand: cos/sin[k][n]
  mutable std::vector<double> cos_tab_, sin_tab_;
  void ensure_tables() const;
};

// In-place radix-2 FFT; n must be a power of two.
void Fft(std::vector<std::complex<double>>& x, bool inverse);

// Area-normalized triangular mel filterbank, [n_mels x (fft/2 + 1)].
Tensor MelFilterbank(int n_mels, int fft_size, int sample_rate);

// Log-mel features [n_mels x T] on the same frame grid as stft(). A floor of
// 1e-10 is applied to band energies before the log.
Tensor LogMel(const AudioBuffer& audio, int n_mels, const SpectroConfig& cfg);

}  // namespace dkws

#endif  // DKWS_DSP_HPP_

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_AUDIO_HPP_
#define DKWS_AUDIO_HPP_

#include <string>
#include <vector>

namespace dkws {

// Mono audio, amplitudes nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  AudioBuffer() = default;
  AudioBuffer(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  void validate() const;  // finite values, positive rate
};

double power(const AudioBuffer& a);
double peak(const AudioBuffer& a);

// PCM 16-bit or 32-bit float WAV, mono only. Any other sample rate than the
// expected one is an error (no resampling).
AudioBuffer ReadWav(const std::string& path, int expected_rate = 0);
void WriteWav(const std::string& path, const AudioBuffer& a);

}  // namespace dkws

#endif  // DKWS_AUDIO_HPP_

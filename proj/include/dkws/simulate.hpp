// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_SIMULATE_HPP_
#define DKWS_SIMULATE_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dkws/audio.hpp"
#include "dkws/rng.hpp"

namespace dkws {

struct RoomSpec {
  std::array<double, 3> dimensions;  // meters (L, W, H)
  std::array<double, 3> source_pos;
  std::array<double, 3> mic_pos;
  double rt60_s = 0.3;

  double volume() const { return dimensions[0] * dimensions[1] * dimensions[2]; }
  double surface() const {
    return 2.0 * (dimensions[0] * dimensions[1] + dimensions[0] * dimensions[2] +
                  dimensions[1] * dimensions[2]);
  }
  // Shortest reverberation time this room can produce (fully absorptive walls).
  double sabine_bound() const { return 0.161 * volume() / surface(); }
  void validate(double rt60_lo, double rt60_hi) const;
};

struct MixtureSpec {
  double snr_db = 0.0;
  int n_noise_types = 1;  // in [1, 4]
  std::vector<std::string> noise_ids;
  uint64_t seed = 0;
};

struct MixturePair {
  AudioBuffer noisy;
  AudioBuffer target;  // reverberant clean speech at mixture gain
  MixtureSpec meta;
  double keyword_end_s = -1.0;  // < 0 for negative clips
};

enum class Label : int { Negative = 0, Positive = 1, Ignore = -1 };
using LabelTrack = std::vector<Label>;

struct ManifestEntry {
  std::string id;
  std::string path;
  std::string type;  // keyword | negative | noise
  std::string speaker;
  double keyword_end_s = -1.0;
};

// Line-delimited tab-separated records: id, path, type, speaker, keyword_end_s.
std::vector<ManifestEntry> LoadManifest(const std::string& path);
void SaveManifest(const std::string& path, const std::vector<ManifestEntry>& entries);
// Throws when train/test speakers or noise files overlap.
void ValidateDisjoint(const std::vector<ManifestEntry>& train,
                      const std::vector<ManifestEntry>& test);

// Allen-Berkley image method. Deterministic for a given spec; errors when the
// requested decay is below the room's Sabine bound.
AudioBuffer ImageMethodRir(const RoomSpec& room, int sample_rate);

// noisy = reverberant speech + scaled noise sum at the requested SNR measured
// over the speech-active region; target carries the identical speech gain.
MixturePair MixUtterance(const AudioBuffer& speech, const AudioBuffer& rir,
                         const std::vector<AudioBuffer>& noises, const MixtureSpec& spec);

// Uniform duration in [1, 3] s. Empty result = entry dropped (input < 1 s).
std::optional<AudioBuffer> ClipNegative(const AudioBuffer& audio, Rng& rng);

// Keyword clips: up to `positive_window` frames centered on the keyword's last
// frame are positive, the rest ignored. Negative clips: everything negative.
LabelTrack LabelFrames(int64_t keyword_end_frame, int64_t total_frames, bool is_keyword,
                       int positive_window = 10);

struct SimRanges {
  double snr_lo = 0.0, snr_hi = 15.0;
  double rt60_lo = 0.05, rt60_hi = 0.95;
  int n_noise_lo = 1, n_noise_hi = 4;
};

// Deterministic on-the-fly mixture source: (manifests, seed, index) fully
// determines each generated pair, so parallel loaders cannot change the data.
class MixtureSampler {
 public:
  MixtureSampler(std::vector<ManifestEntry> speech, std::vector<ManifestEntry> noise,
                 SimRanges ranges, int sample_rate, uint64_t seed);

  struct Sample {
    MixturePair pair;
    bool is_keyword = false;
    std::string utterance_id;
  };

  // want_keyword selects the positive or negative sub-pool.
  Sample draw(uint64_t index, bool want_keyword) const;

  const std::vector<ManifestEntry>& keyword_entries() const { return keywords_; }
  const std::vector<ManifestEntry>& negative_entries() const { return negatives_; }

 private:
  std::vector<ManifestEntry> keywords_, negatives_, noises_;
  SimRanges ranges_;
  int rate_;
  uint64_t seed_;
};

}  // namespace dkws

#endif  // DKWS_SIMULATE_HPP_

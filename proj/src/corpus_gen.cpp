// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/corpus_gen.hpp"

#include <cmath>
#include <filesystem>

#include "dkws/rng.hpp"

namespace dkws {

namespace {
constexpr double kPi = 3.14159265358979323846;

// speaker-specific motif frequencies, kept well under the Nyquist of the
// smallest supported rate
double speaker_f1(int speaker) { return 240.0 + 45.0 * (speaker % 12); }

void add_tone(std::vector<double>& x, int rate, double t0, double dur, double freq,
              double amp) {
  int n0 = static_cast<int>(t0 * rate);
  int n1 = std::min<int>(static_cast<int>((t0 + dur) * rate), static_cast<int>(x.size()));
  int ramp = std::max(1, rate / 100);  // 10 ms raised-cosine edges
  for (int n = n0; n < n1; ++n) {
    double env = 1.0;
    if (n - n0 < ramp) env = 0.5 - 0.5 * std::cos(kPi * (n - n0) / ramp);
    if (n1 - 1 - n < ramp) env = std::min(env, 0.5 - 0.5 * std::cos(kPi * (n1 - 1 - n) / ramp));
    x[static_cast<size_t>(n)] += amp * env * std::sin(2.0 * kPi * freq * (n - n0) / rate);
  }
}

// low-level colored background so clips are never digitally silent
void add_bed(std::vector<double>& x, int rate, Rng& rng, double amp) {
  double state = 0.0;
  double a = std::exp(-2.0 * kPi * 80.0 / rate);  // one-pole lowpass at 80 Hz
  for (double& v : x) {
    state = a * state + (1.0 - a) * rng.normal();
    v += amp * state;
  }
}

AudioBuffer make_keyword(int rate, int speaker, Rng& rng, double* end_s) {
  double dur = rng.uniform(1.6, 2.4);
  std::vector<double> x(static_cast<size_t>(dur * rate), 0.0);
  double f1 = speaker_f1(speaker) * rng.uniform(0.97, 1.03);
  double f2 = 1.5 * f1 * rng.uniform(0.97, 1.03);
  double tone_dur = rng.uniform(0.22, 0.28);
  double t0 = rng.uniform(0.2, dur - 2.0 * tone_dur - 0.3);
  add_tone(x, rate, t0, tone_dur, f1, 0.35);
  add_tone(x, rate, t0 + tone_dur, tone_dur, f2, 0.35);
  add_bed(x, rate, rng, 0.01);
  if (end_s) *end_s = t0 + 2.0 * tone_dur;
  return AudioBuffer(std::move(x), rate);
}

AudioBuffer make_negative(int rate, int speaker, Rng& rng) {
  double dur = rng.uniform(1.6, 2.4);
  std::vector<double> x(static_cast<size_t>(dur * rate), 0.0);
  double f1 = speaker_f1(speaker) * rng.uniform(0.97, 1.03);
  double tone_dur = rng.uniform(0.22, 0.28);
  double t0 = rng.uniform(0.2, dur - 2.0 * tone_dur - 0.3);
  switch (rng.uniform_int(0, 2)) {
    case 0:  // descending pair below the keyword band
      add_tone(x, rate, t0, tone_dur, 0.8 * f1, 0.35);
      add_tone(x, rate, t0 + tone_dur, tone_dur, 0.6 * f1, 0.35);
      break;
    case 1:  // single sustained low tone
      add_tone(x, rate, t0, 2.0 * tone_dur, f1 * 0.7, 0.35);
      break;
    default:  // two equal tones, no frequency step
      add_tone(x, rate, t0, tone_dur, 0.85 * f1, 0.35);
      add_tone(x, rate, t0 + tone_dur, tone_dur, 0.85 * f1, 0.35);
      break;
  }
  add_bed(x, rate, rng, 0.01);
  return AudioBuffer(std::move(x), rate);
}

AudioBuffer make_noise(int rate, int kind, Rng& rng) {
  double dur = rng.uniform(3.0, 5.0);
  std::vector<double> x(static_cast<size_t>(dur * rate), 0.0);
  switch (kind % 3) {
    case 0:  // white
      for (double& v : x) v = 0.25 * rng.normal();
      break;
    case 1: {  // lowpassed rumble
      double state = 0.0, a = std::exp(-2.0 * kPi * 120.0 / rate);
      for (double& v : x) {
        state = a * state + (1.0 - a) * rng.normal();
        v = 1.2 * state;
      }
      break;
    }
    default: {  // hum plus hiss
      double f = rng.uniform(90.0, 140.0);
      for (size_t n = 0; n < x.size(); ++n)
        x[n] = 0.18 * std::sin(2.0 * kPi * f * static_cast<double>(n) / rate) +
               0.08 * rng.normal();
      break;
    }
  }
  return AudioBuffer(std::move(x), rate);
}
}  // namespace

AudioBuffer SynthKeywordClip(int sample_rate, int speaker, uint64_t seed,
                             double* keyword_end_s) {
  Rng rng(Rng::derive(seed, 0x6b770000 + static_cast<uint64_t>(speaker)));
  return make_keyword(sample_rate, speaker, rng, keyword_end_s);
}

CorpusPaths GenerateSyntheticCorpus(const CorpusSpec& spec) {
  if (spec.n_speakers < 1) throw std::invalid_argument("CorpusSpec: n_speakers >= 1");
  if (spec.n_noise < 1) throw std::invalid_argument("CorpusSpec: n_noise >= 1");
  namespace fs = std::filesystem;
  fs::path root(spec.out_dir);
  fs::create_directories(root / "wav");

  std::vector<ManifestEntry> speech, noise;
  for (int i = 0; i < spec.n_keywords; ++i) {
    int speaker = spec.speaker_offset + i % spec.n_speakers;
    Rng rng(Rng::derive(spec.seed, 0x6b000000 + static_cast<uint64_t>(i)));
    double end_s = 0.0;
    AudioBuffer a = make_keyword(spec.sample_rate, speaker, rng, &end_s);
    ManifestEntry e;
    e.id = spec.prefix + "_kw" + std::to_string(i);
    e.path = (root / "wav" / (e.id + ".wav")).string();
    e.type = "keyword";
    e.speaker = "spk" + std::to_string(speaker);
    e.keyword_end_s = end_s;
    WriteWav(e.path, a);
    speech.push_back(std::move(e));
  }
  for (int i = 0; i < spec.n_negatives; ++i) {
    int speaker = spec.speaker_offset + i % spec.n_speakers;
    Rng rng(Rng::derive(spec.seed, 0x6e000000 + static_cast<uint64_t>(i)));
    AudioBuffer a = make_negative(spec.sample_rate, speaker, rng);
    ManifestEntry e;
    e.id = spec.prefix + "_neg" + std::to_string(i);
    e.path = (root / "wav" / (e.id + ".wav")).string();
    e.type = "negative";
    e.speaker = "spk" + std::to_string(speaker);
    e.keyword_end_s = -1.0;
    WriteWav(e.path, a);
    speech.push_back(std::move(e));
  }
  for (int i = 0; i < spec.n_noise; ++i) {
    Rng rng(Rng::derive(spec.seed, 0x7a000000 + static_cast<uint64_t>(i)));
    AudioBuffer a = make_noise(spec.sample_rate, i, rng);
    ManifestEntry e;
    e.id = spec.prefix + "_noise" + std::to_string(i);
    e.path = (root / "wav" / (e.id + ".wav")).string();
    e.type = "noise";
    e.speaker = "-";
    e.keyword_end_s = -1.0;
    WriteWav(e.path, a);
    noise.push_back(std::move(e));
  }

  CorpusPaths paths;
  paths.speech_manifest = (root / (spec.prefix + "_speech.tsv")).string();
  paths.noise_manifest = (root / (spec.prefix + "_noise.tsv")).string();
  SaveManifest(paths.speech_manifest, speech);
  SaveManifest(paths.noise_manifest, noise);
  return paths;
}

}  // namespace dkws

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "dkws/corpus_gen.hpp"
#include "dkws/simulate.hpp"

using namespace dkws;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Schroeder backward-integration reverberation time: fit the decay between
// -5 dB and -35 dB and extrapolate to 60 dB. Independent of the synthesis.
double SchroederT60(const AudioBuffer& rir) {
  size_t n = rir.size();
  std::vector<double> edc(n, 0.0);
  double acc = 0.0;
  for (size_t i = n; i-- > 0;) {
    acc += rir.samples[i] * rir.samples[i];
    edc[i] = acc;
  }
  double e0 = edc[0];
  double t5 = -1.0, t35 = -1.0;
  for (size_t i = 0; i < n; ++i) {
    double db = 10.0 * std::log10(edc[i] / e0 + 1e-300);
    if (t5 < 0.0 && db <= -5.0) t5 = static_cast<double>(i) / rir.sample_rate;
    if (t35 < 0.0 && db <= -35.0) {
      t35 = static_cast<double>(i) / rir.sample_rate;
      break;
    }
  }
  REQUIRE(t5 >= 0.0);
  REQUIRE(t35 > t5);
  return 2.0 * (t35 - t5);
}

std::string TmpDir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(p);
  return p.string();
}
}  // namespace

TEST_CASE("manifest round trip and validation") {
  std::string path = TmpDir("dkws_sim") + "/m.tsv";
  std::vector<ManifestEntry> in = {
      {"kw0", "/a.wav", "keyword", "spk0", 1.25},
      {"n0", "/b.wav", "negative", "spk1", -1.0},
      {"z0", "/c.wav", "noise", "-", -1.0},
  };
  SaveManifest(path, in);
  auto out = LoadManifest(path);
  REQUIRE(out.size() == 3);
  CHECK(out[0].id == "kw0");
  CHECK(out[0].keyword_end_s == doctest::Approx(1.25));
  CHECK(out[1].type == "negative");
  CHECK(out[2].type == "noise");

  // keyword without an end time is rejected
  std::vector<ManifestEntry> bad = {{"kw1", "/a.wav", "keyword", "spk0", -1.0}};
  std::string bad_path = TmpDir("dkws_sim") + "/bad.tsv";
  SaveManifest(bad_path, bad);
  CHECK_THROWS(LoadManifest(bad_path));
}

TEST_CASE("train/test overlap is rejected") {
  std::vector<ManifestEntry> train = {{"a", "/a.wav", "keyword", "spk0", 1.0},
                                      {"z", "/n1.wav", "noise", "-", -1.0}};
  std::vector<ManifestEntry> ok = {{"b", "/b.wav", "keyword", "spk9", 1.0},
                                   {"z2", "/n2.wav", "noise", "-", -1.0}};
  CHECK_NOTHROW(ValidateDisjoint(train, ok));
  std::vector<ManifestEntry> spk_clash = {{"c", "/c.wav", "negative", "spk0", -1.0}};
  CHECK_THROWS(ValidateDisjoint(train, spk_clash));
  std::vector<ManifestEntry> noise_clash = {{"z3", "/n1.wav", "noise", "-", -1.0}};
  CHECK_THROWS(ValidateDisjoint(train, noise_clash));
}

TEST_CASE("room validation") {
  RoomSpec room;
  room.dimensions = {5.0, 4.0, 3.0};
  room.source_pos = {1.0, 1.0, 1.0};
  room.mic_pos = {3.0, 2.0, 1.5};
  room.rt60_s = 0.3;
  CHECK_NOTHROW(room.validate(0.05, 0.95));
  room.rt60_s = 1.2;
  CHECK_THROWS(room.validate(0.05, 0.95));
  room.rt60_s = 0.3;
  room.mic_pos[0] = 6.0;
  CHECK_THROWS(room.validate(0.05, 0.95));
  // unreachable decay for the simulator
  RoomSpec tight = room;
  tight.mic_pos[0] = 3.0;
  tight.rt60_s = 0.01;
  CHECK(tight.rt60_s < tight.sabine_bound());
  CHECK_THROWS(ImageMethodRir(tight, 8000));
}

TEST_CASE("image-method rir decays at the requested rate") {
  RoomSpec room;
  room.dimensions = {6.0, 5.0, 3.0};
  room.source_pos = {1.5, 1.2, 1.4};
  room.mic_pos = {4.2, 3.4, 1.6};
  for (double want : {0.25, 0.55}) {
    room.rt60_s = want;
    AudioBuffer rir = ImageMethodRir(room, 16000);
    double got = SchroederT60(rir);
    CHECK(std::abs(got - want) / want < 0.20);
  }
  // determinism
  room.rt60_s = 0.3;
  AudioBuffer a = ImageMethodRir(room, 16000);
  AudioBuffer b = ImageMethodRir(room, 16000);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i] == b.samples[i]);
}

TEST_CASE("mixture hits the requested snr over the active region") {
  int rate = 2000;
  std::vector<double> sp(4000);
  for (size_t n = 0; n < sp.size(); ++n) sp[n] = 0.3 * std::sin(2.0 * kPi * 200.0 * n / rate);
  AudioBuffer speech(sp, rate);
  AudioBuffer rir(std::vector<double>{1.0}, rate);  // anechoic: target == speech

  Rng nrng(11);
  std::vector<double> nz(6000);
  for (double& v : nz) v = 0.2 * nrng.normal();
  std::vector<AudioBuffer> noises = {AudioBuffer(nz, rate)};

  for (double snr : {-5.0, 0.0, 7.5, 15.0}) {
    MixtureSpec spec;
    spec.snr_db = snr;
    spec.n_noise_types = 1;
    spec.seed = 99;
    MixturePair mix = MixUtterance(speech, rir, noises, spec);
    REQUIRE(mix.noisy.size() == speech.size());
    // constant-envelope speech: every frame is active, so the whole-signal
    // powers are an independent oracle for the masked measurement
    double ps = 0.0, pn = 0.0;
    for (size_t i = 0; i < speech.size(); ++i) {
      ps += mix.target.samples[i] * mix.target.samples[i];
      double d = mix.noisy.samples[i] - mix.target.samples[i];
      pn += d * d;
    }
    double got = 10.0 * std::log10(ps / pn);
    CHECK(std::abs(got - snr) < 0.1);
  }

  // silent speech is rejected
  AudioBuffer silent(std::vector<double>(4000, 0.0), rate);
  MixtureSpec spec;
  spec.n_noise_types = 1;
  CHECK_THROWS(MixUtterance(silent, rir, noises, spec));
}

TEST_CASE("negative clipping duration bounds") {
  Rng rng(5);
  AudioBuffer longa(std::vector<double>(8000, 0.1), 2000);  // 4 s
  for (int i = 0; i < 20; ++i) {
    auto c = ClipNegative(longa, rng);
    REQUIRE(c.has_value());
    CHECK(c->duration_s() >= 1.0 - 1e-9);
    CHECK(c->duration_s() <= 3.0 + 1e-9);
  }
  AudioBuffer shorta(std::vector<double>(1500, 0.1), 2000);  // 0.75 s
  CHECK(!ClipNegative(shorta, rng).has_value());
}

TEST_CASE("frame labels") {
  // negative: all frames negative
  LabelTrack neg = LabelFrames(-1, 8, false);
  for (Label l : neg) CHECK(l == Label::Negative);

  // keyword: window centered on the end frame, remainder ignored
  LabelTrack kw = LabelFrames(20, 40, true, 10);
  int pos = 0;
  for (size_t f = 0; f < kw.size(); ++f) {
    if (f >= 15 && f < 25) {
      CHECK(kw[f] == Label::Positive);
      ++pos;
    } else {
      CHECK(kw[f] == Label::Ignore);
    }
  }
  CHECK(pos == 10);

  // clipped at the track edge
  LabelTrack edge = LabelFrames(1, 30, true, 10);
  CHECK(edge[0] == Label::Positive);
  CHECK(edge[5] == Label::Positive);
  CHECK(edge[6] == Label::Ignore);
  CHECK_THROWS(LabelFrames(40, 30, true, 10));
}

TEST_CASE("sampler determinism and pools") {
  std::string dir = TmpDir("dkws_sim_corpus");
  CorpusSpec cs;
  cs.out_dir = dir;
  cs.prefix = "t";
  cs.n_keywords = 4;
  cs.n_negatives = 4;
  cs.n_noise = 2;
  cs.seed = 3;
  CorpusPaths paths = GenerateSyntheticCorpus(cs);
  auto speech = LoadManifest(paths.speech_manifest);
  auto noise = LoadManifest(paths.noise_manifest);
  REQUIRE(speech.size() == 8);
  REQUIRE(noise.size() == 2);

  SimRanges ranges;
  ranges.snr_lo = 0.0;
  ranges.snr_hi = 10.0;
  ranges.rt60_lo = 0.05;
  ranges.rt60_hi = 0.3;
  MixtureSampler sampler(speech, noise, ranges, 2000, 17);
  CHECK(sampler.keyword_entries().size() == 4);
  CHECK(sampler.negative_entries().size() == 4);

  auto a = sampler.draw(5, true);
  auto b = sampler.draw(5, true);
  CHECK(a.is_keyword);
  CHECK(a.utterance_id == b.utterance_id);
  REQUIRE(a.pair.noisy.size() == b.pair.noisy.size());
  for (size_t i = 0; i < a.pair.noisy.size(); ++i)
    CHECK(a.pair.noisy.samples[i] == b.pair.noisy.samples[i]);
  CHECK(a.pair.keyword_end_s > 0.0);

  auto c = sampler.draw(5, false);
  CHECK(!c.is_keyword);
  CHECK(c.pair.keyword_end_s < 0.0);
  // different index gives a different mixture
  auto d = sampler.draw(6, true);
  bool same = a.pair.noisy.size() == d.pair.noisy.size();
  if (same) {
    bool all_eq = true;
    for (size_t i = 0; i < a.pair.noisy.size(); ++i)
      if (a.pair.noisy.samples[i] != d.pair.noisy.samples[i]) {
        all_eq = false;
        break;
      }
    same = all_eq;
  }
  CHECK(!same);
}

TEST_CASE("synthetic corpus wavs round-trip") {
  std::string dir = TmpDir("dkws_sim_wav");
  double end_s = 0.0;
  AudioBuffer kw = SynthKeywordClip(2000, 1, 42, &end_s);
  CHECK(end_s > 0.0);
  CHECK(end_s < kw.duration_s());
  std::string path = dir + "/kw.wav";
  WriteWav(path, kw);
  AudioBuffer back = ReadWav(path, 2000);
  REQUIRE(back.size() == kw.size());
  for (size_t i = 0; i < back.size(); i += 97)
    CHECK(back.samples[i] == doctest::Approx(kw.samples[i]).epsilon(1e-4));
  CHECK_THROWS(ReadWav(path, 16000));  // rate mismatch is an error
}

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dkws {

namespace {
constexpr double kSpeedOfSound = 343.0;
constexpr double kPi = 3.14159265358979323846;
constexpr double kActiveThreshold = 1e-6;  // -60 dBFS mean-square
}  // namespace

void RoomSpec::validate(double rt60_lo, double rt60_hi) const {
  for (double d : dimensions)
    if (d <= 0.0) throw std::invalid_argument("RoomSpec: non-positive dimension");
  for (int i = 0; i < 3; ++i) {
    if (source_pos[i] <= 0.0 || source_pos[i] >= dimensions[i])
      throw std::invalid_argument("RoomSpec: source outside room");
    if (mic_pos[i] <= 0.0 || mic_pos[i] >= dimensions[i])
      throw std::invalid_argument("RoomSpec: mic outside room");
  }
  if (rt60_s < rt60_lo || rt60_s > rt60_hi)
    throw std::invalid_argument("RoomSpec: rt60 " + std::to_string(rt60_s) +
                                " outside configured range [" + std::to_string(rt60_lo) + ", " +
                                std::to_string(rt60_hi) + "]");
}

std::vector<ManifestEntry> LoadManifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("LoadManifest: cannot open " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string end_s;
    if (!std::getline(ss, e.id, '\t') || !std::getline(ss, e.path, '\t') ||
        !std::getline(ss, e.type, '\t'))
      throw std::runtime_error("LoadManifest: malformed line " + std::to_string(lineno) + " in " +
                               path);
    std::getline(ss, e.speaker, '\t');
    if (std::getline(ss, end_s, '\t') && !end_s.empty()) e.keyword_end_s = std::stod(end_s);
    if (e.type != "keyword" && e.type != "negative" && e.type != "noise")
      throw std::runtime_error("LoadManifest: unknown type '" + e.type + "' at line " +
                               std::to_string(lineno));
    if (e.type == "keyword" && e.keyword_end_s < 0.0)
      throw std::runtime_error("LoadManifest: keyword entry '" + e.id +
                               "' is missing its end time");
    out.push_back(std::move(e));
  }
  return out;
}

void SaveManifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("SaveManifest: cannot open " + path);
  for (const auto& e : entries) {
    f << e.id << '\t' << e.path << '\t' << e.type << '\t' << e.speaker << '\t';
    if (e.keyword_end_s >= 0.0) f << e.keyword_end_s;
    f << '\n';
  }
}

void ValidateDisjoint(const std::vector<ManifestEntry>& train,
                      const std::vector<ManifestEntry>& test) {
  std::set<std::string> speakers, noises;
  for (const auto& e : train) {
    if (e.type == "noise")
      noises.insert(e.path);
    else if (!e.speaker.empty())
      speakers.insert(e.speaker);
  }
  for (const auto& e : test) {
    if (e.type == "noise") {
      if (noises.count(e.path))
        throw std::runtime_error("ValidateDisjoint: noise '" + e.path +
                                 "' appears in both train and test");
    } else if (!e.speaker.empty() && speakers.count(e.speaker)) {
      throw std::runtime_error("ValidateDisjoint: speaker '" + e.speaker +
                               "' appears in both train and test");
    }
  }
}

namespace {

// One image-method synthesis pass with a given wall reflection coefficient.
std::vector<double> SynthImages(const RoomSpec& room, int sample_rate, double beta,
                                double t_max) {
  size_t n_out = static_cast<size_t>(t_max * sample_rate) + 64;
  std::vector<double> h(n_out, 0.0);
  double reach = kSpeedOfSound * t_max;
  std::array<int, 3> nmax;
  for (int i = 0; i < 3; ++i)
    nmax[i] = static_cast<int>(reach / (2.0 * room.dimensions[i])) + 1;

  const int sinc_half = 4;
  for (int nx = -nmax[0]; nx <= nmax[0]; ++nx)
    for (int ny = -nmax[1]; ny <= nmax[1]; ++ny)
      for (int nz = -nmax[2]; nz <= nmax[2]; ++nz)
        for (int q = 0; q < 8; ++q) {
          int qx = q & 1, qy = (q >> 1) & 1, qz = (q >> 2) & 1;
          double ix = (1 - 2 * qx) * room.source_pos[0] + 2.0 * nx * room.dimensions[0];
          double iy = (1 - 2 * qy) * room.source_pos[1] + 2.0 * ny * room.dimensions[1];
          double iz = (1 - 2 * qz) * room.source_pos[2] + 2.0 * nz * room.dimensions[2];
          double dx = ix - room.mic_pos[0], dy = iy - room.mic_pos[1], dz = iz - room.mic_pos[2];
          double d = std::sqrt(dx * dx + dy * dy + dz * dz);
          if (d > reach) continue;
          int refl = std::abs(nx - qx) + std::abs(nx) + std::abs(ny - qy) + std::abs(ny) +
                     std::abs(nz - qz) + std::abs(nz);
          double amp = std::pow(beta, refl) / (4.0 * kPi * std::max(d, 0.01));
          double delay = d / kSpeedOfSound * sample_rate;
          int center = static_cast<int>(std::lround(delay));
          for (int i = center - sinc_half; i <= center + sinc_half; ++i) {
            if (i < 0 || i >= static_cast<int>(n_out)) continue;
            double x = static_cast<double>(i) - delay;
            double sinc = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
            double wnd = 0.5 + 0.5 * std::cos(kPi * x / (sinc_half + 1));
            h[static_cast<size_t>(i)] += amp * sinc * wnd;
          }
        }
  return h;
}

// Schroeder backward-integrated decay time, extrapolated from -5..-25 dB.
double MeasureT60(const std::vector<double>& h, int sample_rate) {
  size_t n = h.size();
  std::vector<double> edc(n, 0.0);
  double acc = 0.0;
  for (size_t i = n; i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  if (edc[0] <= 0.0) return -1.0;
  double t5 = -1.0, t25 = -1.0;
  for (size_t i = 0; i < n; ++i) {
    double db = 10.0 * std::log10(edc[i] / edc[0] + 1e-300);
    if (t5 < 0.0 && db <= -5.0) t5 = static_cast<double>(i) / sample_rate;
    if (db <= -25.0) {
      t25 = static_cast<double>(i) / sample_rate;
      break;
    }
  }
  if (t5 < 0.0 || t25 <= t5) return -1.0;
  return 3.0 * (t25 - t5);
}

}  // namespace

AudioBuffer ImageMethodRir(const RoomSpec& room, int sample_rate) {
  for (double d : room.dimensions)
    if (d <= 0.0) throw std::invalid_argument("ImageMethodRir: non-positive dimension");
  double bound = room.sabine_bound();
  if (room.rt60_s < bound)
    throw std::invalid_argument("ImageMethodRir: rt60 " + std::to_string(room.rt60_s) +
                                " s is below the Sabine bound " + std::to_string(bound) +
                                " s for this room");
  // Eyring wall reflection coefficient for the requested decay. With uniform
  // walls the late field is dominated by low-loss axial paths, so the measured
  // decay comes out longer than the Eyring prediction; calibrate the absorption
  // against a cheap low-rate synthesis until the Schroeder estimate matches.
  double alpha = 1.0 - std::exp(-0.161 * room.volume() / (room.surface() * room.rt60_s));
  double log_beta = 0.5 * std::log(1.0 - alpha);
  int cal_rate = std::min(sample_rate, 8000);
  double scale = 1.0;
  for (int iter = 0; iter < 4; ++iter) {
    double t_max = room.rt60_s * 1.2 / std::min(scale, 1.0) + 0.02;
    std::vector<double> h =
        SynthImages(room, cal_rate, std::exp(scale * log_beta), t_max);
    double got = MeasureT60(h, cal_rate);
    if (got <= 0.0) break;
    double ratio = got / room.rt60_s;
    if (std::abs(ratio - 1.0) < 0.03) break;
    scale *= ratio;
  }

  double t_max = room.rt60_s * 1.2 + 0.02;
  std::vector<double> h = SynthImages(room, sample_rate, std::exp(scale * log_beta), t_max);
  // normalize to unit peak (the direct path) so convolution preserves the
  // source level; decay shape and hence T60 are scale-invariant
  double pk = 0.0;
  for (double v : h) pk = std::max(pk, std::fabs(v));
  if (pk > 0.0)
    for (double& v : h) v /= pk;
  return AudioBuffer(std::move(h), sample_rate);
}

namespace {

std::vector<bool> ActiveMask(const std::vector<double>& x, int frame) {
  size_t n = x.size();
  std::vector<bool> mask(n, false);
  for (size_t start = 0; start < n; start += static_cast<size_t>(frame)) {
    size_t end = std::min(n, start + static_cast<size_t>(frame));
    double e = 0.0;
    for (size_t i = start; i < end; ++i) e += x[i] * x[i];
    e /= static_cast<double>(end - start);
    if (e > kActiveThreshold)
      for (size_t i = start; i < end; ++i) mask[i] = true;
  }
  return mask;
}

double MaskedPower(const std::vector<double>& x, const std::vector<bool>& mask) {
  double s = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < x.size(); ++i)
    if (mask[i]) {
      s += x[i] * x[i];
      ++n;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

MixturePair MixUtterance(const AudioBuffer& speech, const AudioBuffer& rir,
                         const std::vector<AudioBuffer>& noises, const MixtureSpec& spec) {
  speech.validate();
  if (spec.n_noise_types < 1 || spec.n_noise_types > 4)
    throw std::invalid_argument("MixUtterance: n_noise_types must be in [1, 4]");
  if (static_cast<int>(noises.size()) != spec.n_noise_types)
    throw std::invalid_argument("MixUtterance: expected " + std::to_string(spec.n_noise_types) +
                                " noises, got " + std::to_string(noises.size()));
  size_t n = speech.size();
  int rate = speech.sample_rate;

  // reverberant speech (full convolution truncated to the utterance length)
  std::vector<double> rev(n, 0.0);
  if (rir.samples.empty()) {
    rev = speech.samples;
  } else {
    for (size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      size_t kmax = std::min(i + 1, rir.samples.size());
      for (size_t k = 0; k < kmax; ++k) acc += rir.samples[k] * speech.samples[i - k];
      rev[i] = acc;
    }
  }

  int frame = std::max(1, rate / 100);  // 10 ms activity frames
  std::vector<bool> mask = ActiveMask(rev, frame);
  double p_speech = MaskedPower(rev, mask);
  if (p_speech <= 0.0) throw std::invalid_argument("MixUtterance: silent speech (zero power)");

  Rng rng(Rng::derive(spec.seed, 0x6d6978));
  std::vector<double> noise_sum(n, 0.0);
  for (const AudioBuffer& nb : noises) {
    if (nb.samples.empty() || power(nb) <= 0.0)
      throw std::invalid_argument("MixUtterance: zero-power noise source");
    size_t offset = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(nb.size()) - 1));
    double scale = 1.0 / std::sqrt(power(nb));
    for (size_t i = 0; i < n; ++i)
      noise_sum[i] += scale * nb.samples[(offset + i) % nb.size()];
  }
  double p_noise = MaskedPower(noise_sum, mask);
  if (p_noise <= 0.0) throw std::invalid_argument("MixUtterance: zero-power noise mixture");

  double gain = std::sqrt(p_speech / (p_noise * std::pow(10.0, spec.snr_db / 10.0)));
  std::vector<double> noisy(n);
  for (size_t i = 0; i < n; ++i) noisy[i] = rev[i] + gain * noise_sum[i];

  double pk = 0.0;
  for (double x : noisy) pk = std::max(pk, std::fabs(x));
  if (pk > 0.95) {
    double s = 0.95 / pk;
    for (size_t i = 0; i < n; ++i) {
      noisy[i] *= s;
      rev[i] *= s;
    }
  }

  MixturePair out;
  out.noisy = AudioBuffer(std::move(noisy), rate);
  out.target = AudioBuffer(std::move(rev), rate);
  out.meta = spec;
  return out;
}

std::optional<AudioBuffer> ClipNegative(const AudioBuffer& audio, Rng& rng) {
  int rate = audio.sample_rate;
  if (audio.duration_s() < 1.0) return std::nullopt;  // dropped (caller warns)
  double dur = rng.uniform(1.0, 3.0);
  size_t len = std::min(audio.size(), static_cast<size_t>(dur * rate));
  size_t max_off = audio.size() - len;
  size_t off = max_off ? static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(max_off))) : 0;
  std::vector<double> seg(audio.samples.begin() + static_cast<int64_t>(off),
                          audio.samples.begin() + static_cast<int64_t>(off + len));
  return AudioBuffer(std::move(seg), rate);
}

LabelTrack LabelFrames(int64_t keyword_end_frame, int64_t total_frames, bool is_keyword,
                       int positive_window) {
  if (total_frames <= 0) throw std::invalid_argument("LabelFrames: empty track");
  if (!is_keyword) return LabelTrack(static_cast<size_t>(total_frames), Label::Negative);
  if (keyword_end_frame < 0 || keyword_end_frame >= total_frames)
    throw std::invalid_argument("LabelFrames: keyword end frame out of range");
  LabelTrack track(static_cast<size_t>(total_frames), Label::Ignore);
  int64_t lo = keyword_end_frame - positive_window / 2;
  int64_t hi = lo + positive_window;  // exclusive
  for (int64_t f = std::max<int64_t>(0, lo); f < std::min(total_frames, hi); ++f)
    track[static_cast<size_t>(f)] = Label::Positive;
  return track;
}

MixtureSampler::MixtureSampler(std::vector<ManifestEntry> speech,
                               std::vector<ManifestEntry> noise, SimRanges ranges,
                               int sample_rate, uint64_t seed)
    : ranges_(ranges), rate_(sample_rate), seed_(seed) {
  for (auto& e : speech) {
    if (e.type == "keyword")
      keywords_.push_back(std::move(e));
    else if (e.type == "negative")
      negatives_.push_back(std::move(e));
  }
  for (auto& e : noise)
    if (e.type == "noise") noises_.push_back(std::move(e));
  if (noises_.empty()) throw std::invalid_argument("MixtureSampler: no noise entries");
}

MixtureSampler::Sample MixtureSampler::draw(uint64_t index, bool want_keyword) const {
  const auto& pool = want_keyword ? keywords_ : negatives_;
  if (pool.empty()) throw std::runtime_error("MixtureSampler: empty utterance pool");
  Rng rng(Rng::derive(seed_, index * 2 + (want_keyword ? 1 : 0)));

  const ManifestEntry& entry = pool[static_cast<size_t>(
      rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
  AudioBuffer full = ReadWav(entry.path, rate_);
  AudioBuffer speech = full;
  double keyword_end_s = entry.keyword_end_s;
  if (!want_keyword) {
    auto clipped = ClipNegative(speech, rng);
    if (clipped) speech = std::move(*clipped);
  }

  // random shoebox room with a reachable decay
  RoomSpec room;
  room.dimensions = {rng.uniform(3.0, 8.0), rng.uniform(3.0, 6.0), rng.uniform(2.4, 3.5)};
  for (int i = 0; i < 3; ++i) {
    room.source_pos[i] = rng.uniform(0.5, room.dimensions[i] - 0.5);
    room.mic_pos[i] = rng.uniform(0.5, room.dimensions[i] - 0.5);
  }
  room.rt60_s = rng.uniform(ranges_.rt60_lo, ranges_.rt60_hi);
  room.rt60_s = std::max(room.rt60_s, room.sabine_bound() * 1.05);
  AudioBuffer rir = ImageMethodRir(room, rate_);

  MixtureSpec spec;
  spec.snr_db = rng.uniform(ranges_.snr_lo, ranges_.snr_hi);
  spec.n_noise_types =
      static_cast<int>(rng.uniform_int(ranges_.n_noise_lo, ranges_.n_noise_hi));
  spec.n_noise_types = std::min<int>(spec.n_noise_types, static_cast<int>(noises_.size()));
  spec.seed = Rng::derive(seed_, index * 1000003 + 7);

  // distinct noise entries
  std::vector<size_t> idx(noises_.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (size_t i = 0; i < idx.size(); ++i)
    std::swap(idx[i], idx[static_cast<size_t>(
                          rng.uniform_int(static_cast<int64_t>(i),
                                          static_cast<int64_t>(idx.size()) - 1))]);
  std::vector<AudioBuffer> noise_bufs;
  for (int i = 0; i < spec.n_noise_types; ++i) {
    spec.noise_ids.push_back(noises_[idx[static_cast<size_t>(i)]].id);
    noise_bufs.push_back(ReadWav(noises_[idx[static_cast<size_t>(i)]].path, rate_));
  }

  Sample s;
  try {
    s.pair = MixUtterance(speech, rir, noise_bufs, spec);
  } catch (const std::invalid_argument&) {
    // a clipped negative can land entirely on near-silence; use the whole clip
    if (want_keyword || speech.size() == full.size()) throw;
    s.pair = MixUtterance(full, rir, noise_bufs, spec);
  }
  s.pair.keyword_end_s = want_keyword ? keyword_end_s : -1.0;
  s.is_keyword = want_keyword;
  s.utterance_id = entry.id;
  return s;
}

}  // namespace dkws

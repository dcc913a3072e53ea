// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dkws/rng.hpp"

namespace dkws {

std::vector<RocPoint> RocCurve(const std::vector<double>& pos_scores,
                               const std::vector<double>& neg_scores,
                               double negative_hours) {
  if (pos_scores.empty() || neg_scores.empty())
    throw std::invalid_argument("RocCurve: need both positive and negative scores");
  std::vector<double> thresholds;
  thresholds.reserve(pos_scores.size() + neg_scores.size() + 2);
  for (double s : pos_scores) thresholds.push_back(s);
  for (double s : neg_scores) thresholds.push_back(s);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  // sentinel above every score so the FA = 0 endpoint always exists
  thresholds.push_back(thresholds.back() + 1.0);

  std::vector<RocPoint> curve;
  curve.reserve(thresholds.size());
  for (double th : thresholds) {
    RocPoint p;
    p.threshold = th;
    int64_t fr = 0, fa = 0;
    for (double s : pos_scores)
      if (s < th) ++fr;
    for (double s : neg_scores)
      if (s >= th) ++fa;
    p.false_reject = static_cast<double>(fr) / static_cast<double>(pos_scores.size());
    p.false_alarm = static_cast<double>(fa) / static_cast<double>(neg_scores.size());
    if (negative_hours > 0.0)
      p.false_alarms_per_hour = static_cast<double>(fa) / negative_hours;
    curve.push_back(p);
  }
  return curve;
}

double RocAuc(const std::vector<RocPoint>& curve) {
  if (curve.size() < 2) throw std::invalid_argument("RocAuc: curve too short");
  // integrate detection rate over the FA axis (curve ordered by rising
  // threshold, i.e. falling FA); trapezoidal rule
  double auc = 0.0;
  for (size_t i = 1; i < curve.size(); ++i) {
    double fa0 = curve[i].false_alarm, fa1 = curve[i - 1].false_alarm;
    double d0 = 1.0 - curve[i].false_reject, d1 = 1.0 - curve[i - 1].false_reject;
    auc += (fa1 - fa0) * 0.5 * (d0 + d1);
  }
  // extend to FA = 1 with the first point's detection rate if needed
  double fa_max = curve.front().false_alarm;
  if (fa_max < 1.0) auc += (1.0 - fa_max) * (1.0 - curve.front().false_reject);
  return auc;
}

WakeResult WakeAccuracy(const std::vector<double>& pos_scores,
                        const std::vector<double>& neg_scores, double negative_hours) {
  if (pos_scores.empty() || neg_scores.empty())
    throw std::invalid_argument("WakeAccuracy: need both positive and negative scores");
  if (negative_hours <= 0.0)
    throw std::invalid_argument("WakeAccuracy: negative stream duration unknown");
  WakeResult r;
  r.negative_hours = negative_hours;
  r.budget = std::max<int64_t>(1, static_cast<int64_t>(std::floor(negative_hours / 10.0)));

  std::vector<double> thresholds(neg_scores.begin(), neg_scores.end());
  thresholds.insert(thresholds.end(), pos_scores.begin(), pos_scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);

  auto fa_at = [&](double th) {
    int64_t fa = 0;
    for (double s : neg_scores)
      if (s >= th) ++fa;
    return fa;
  };
  // lowest threshold meeting the budget (thresholds ascend; FA is
  // non-increasing, so the first satisfying one is the lowest)
  bool found = false;
  for (double th : thresholds) {
    int64_t fa = fa_at(th);
    if (fa <= r.budget) {
      r.threshold = th;
      r.false_alarms = fa;
      r.budget_met = true;
      found = true;
      break;
    }
  }
  if (!found) {  // strictest threshold, flagged
    r.threshold = thresholds.back();
    r.false_alarms = fa_at(r.threshold);
    r.budget_met = false;
  }
  int64_t hits = 0;
  for (double s : pos_scores)
    if (s >= r.threshold) ++hits;
  r.accuracy = static_cast<double>(hits) / static_cast<double>(pos_scores.size());
  return r;
}

double UtteranceScore(const std::vector<double>& posteriors, int smooth_win) {
  if (posteriors.empty()) throw std::invalid_argument("UtteranceScore: empty track");
  std::vector<double> s = SmoothScores(posteriors, smooth_win);
  return *std::max_element(s.begin(), s.end());
}

std::vector<double> OfflinePosteriors(KwsModel& model, const StftPlan& plan,
                                      const AudioBuffer& audio,
                                      const std::vector<AudioBuffer>& bias_clips) {
  Tape t;
  if (model.config().kws_only) {
    Tensor mel = LogMel(audio, model.config().mel_bins, model.config().spectro);
    V post = model.forward_kws_only(t, mel, false);
    return t.val(post).v;
  }
  ComplexSpectrogram spec = plan.stft(audio);
  V bias = model.resolve_bias(t, bias_clips, false);
  ForwardResult r = model.forward(t, spec, bias, false);
  return t.val(r.posteriors).v;
}

EnergyTable ExportEnergy(KwsModel& model, const StftPlan& plan, const AudioBuffer& audio,
                         const std::vector<AudioBuffer>& bias_clips) {
  if (model.config().kws_only)
    throw std::invalid_argument("ExportEnergy: encoder energies need the full model");
  Tape t;
  ComplexSpectrogram spec = plan.stft(audio);
  auto [re, im] = KwsModel::EncoderInput(spec);
  V xr = t.leaf(std::move(re));
  V xi = t.leaf(std::move(im));
  std::vector<CVar> stack = model.encode(t, xr, xi, false);

  EnergyTable table;
  for (const CVar& layer : stack)
    table.layers.push_back(FrameEnergy(t.val(layer.re), t.val(layer.im)));

  // analogous magnitude sum over the merged per-frame feature
  V bias = model.resolve_bias(t, bias_clips, false);
  (void)bias;  // the merge itself is bias-free; resolved only for parity checks
  CVar merged = model.feature_merge(t, stack);
  const Tensor& mr = t.val(merged.re);
  const Tensor& mi = t.val(merged.im);
  int64_t T = mr.dim(0), D = mr.dim(1);
  table.merged.assign(static_cast<size_t>(T), 0.0);
  for (int64_t f = 0; f < T; ++f)
    for (int64_t d = 0; d < D; ++d) {
      double r = mr.v[f * D + d], i = mi.v[f * D + d];
      table.merged[static_cast<size_t>(f)] += std::sqrt(r * r + i * i);
    }
  return table;
}

void WriteEnergyTable(const std::string& path, const EnergyTable& table) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("WriteEnergyTable: cannot write " + path);
  os.precision(10);
  for (size_t l = 0; l < table.layers.size(); ++l) {
    os << "layer" << (l + 1);
    for (double v : table.layers[l]) os << "\t" << v;
    os << "\n";
  }
  os << "merged";
  for (double v : table.merged) os << "\t" << v;
  os << "\n";
  if (!os) throw std::runtime_error("WriteEnergyTable: write failed for " + path);
}

RtfEntry RtfBenchmark(KwsModel& model, const std::string& mode_name, const RtfOptions& opt) {
  const int rate = model.config().sample_rate;
  Rng rng(Rng::derive(opt.seed, 0x72746600));
  auto noise = [&](double seconds) {
    std::vector<double> x(static_cast<size_t>(seconds * rate));
    for (double& v : x) v = 0.1 * rng.normal();
    return AudioBuffer(std::move(x), rate);
  };

  StreamingRunner runner(model);
  runner.push(noise(opt.warmup_seconds));  // warmup, untimed

  AudioBuffer audio = noise(opt.audio_seconds);
  auto t0 = std::chrono::steady_clock::now();
  runner.push(audio);
  auto t1 = std::chrono::steady_clock::now();

  RtfEntry e;
  e.mode = mode_name;
  e.audio_seconds = audio.duration_s();
  e.process_seconds = std::chrono::duration<double>(t1 - t0).count();
  e.rtf = e.process_seconds / e.audio_seconds;
  return e;
}

std::vector<RtfEntry> RtfComparison(const ModelConfig& base, uint64_t model_seed,
                                    const RtfOptions& opt) {
  struct Mode {
    const char* name;
    bool kws_only;
    ProjectionMode proj;
    bool merge;
  };
  const Mode modes[] = {
      {"kws-only", true, ProjectionMode::kPlain, false},
      {"dccrn-kws", false, ProjectionMode::kPlain, false},
      {"+audio-bias", false, ProjectionMode::kBiasConcat, false},
      {"+feature-merge", false, ProjectionMode::kBiasConcat, true},
      {"+ccl", false, ProjectionMode::kContextLinear, true},
  };
  std::vector<RtfEntry> out;
  for (const Mode& m : modes) {
    ModelConfig cfg = base;
    cfg.kws_only = m.kws_only;
    cfg.projection = m.proj;
    cfg.feature_merge = m.merge;
    cfg.bias_mode = BiasMode::kFixed;
    KwsModel model(cfg, model_seed);
    if (!m.kws_only && m.proj != ProjectionMode::kPlain) {
      // fixed mode at inference runs from a cached embedding
      Rng rng(Rng::derive(model_seed, 0xb1a5));
      Tensor e({static_cast<int64_t>(cfg.bias_dim)});
      for (double& v : e.v) v = rng.normal(0.0, 0.1);
      model.set_cached_bias(std::move(e));
    }
    out.push_back(RtfBenchmark(model, m.name, opt));
  }
  return out;
}

}  // namespace dkws

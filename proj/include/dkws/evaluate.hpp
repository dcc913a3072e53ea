// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_EVALUATE_HPP_
#define DKWS_EVALUATE_HPP_

#include <string>
#include <vector>

#include "dkws/model.hpp"
#include "dkws/streaming.hpp"

namespace dkws {

struct RocPoint {
  double threshold = 0.0;
  double false_reject = 0.0;      // fraction of positive utterances missed
  double false_alarm = 0.0;       // fraction of negative utterances triggering
  double false_alarms_per_hour = 0.0;  // alternate axis; 0 when hours unknown
};

// Threshold sweep over all distinct scores (plus sentinels):
// FR(th) = #{pos < th}/#pos, FA(th) = #{neg >= th}/#neg.
std::vector<RocPoint> RocCurve(const std::vector<double>& pos_scores,
                               const std::vector<double>& neg_scores,
                               double negative_hours = 0.0);

// Area under the detection-rate (1 - FR) vs FA curve; 1.0 = perfect.
double RocAuc(const std::vector<RocPoint>& curve);

struct WakeResult {
  double threshold = 0.0;
  double accuracy = 0.0;      // positive detection fraction at the threshold
  int64_t false_alarms = 0;   // on the negative stream at that threshold
  int64_t budget = 0;         // scaled: max(1, floor(hours / 10))
  bool budget_met = true;
  double negative_hours = 0.0;
};

// Lowest threshold whose negative-stream false-alarm count fits the budget of
// at most one alarm per 10 h, scaled down proportionally for shorter streams.
WakeResult WakeAccuracy(const std::vector<double>& pos_scores,
                        const std::vector<double>& neg_scores, double negative_hours);

// Utterance-level score: maximum smoothed frame posterior.
double UtteranceScore(const std::vector<double>& posteriors, int smooth_win = 30);

// Offline posterior track via the inference graph (no decoder). Bias clips are
// used to resolve the cached embedding when the projection needs one.
std::vector<double> OfflinePosteriors(KwsModel& model, const StftPlan& plan,
                                      const AudioBuffer& audio,
                                      const std::vector<AudioBuffer>& bias_clips);

struct EnergyTable {
  std::vector<std::vector<double>> layers;  // [num_layers][T], Eq-style m_t
  std::vector<double> merged;               // [T]
};

EnergyTable ExportEnergy(KwsModel& model, const StftPlan& plan, const AudioBuffer& audio,
                         const std::vector<AudioBuffer>& bias_clips);
// Tab-separated: one row per layer plus a final "merged" row, columns = frames.
void WriteEnergyTable(const std::string& path, const EnergyTable& table);

struct RtfEntry {
  std::string mode;
  double audio_seconds = 0.0;
  double process_seconds = 0.0;
  double rtf = 0.0;  // process / audio
};

struct RtfOptions {
  double audio_seconds = 60.0;  // measured span, after warmup
  double warmup_seconds = 5.0;
  uint64_t seed = 7;
};

// Single-threaded streaming-inference benchmark of one model configuration.
RtfEntry RtfBenchmark(KwsModel& model, const std::string& mode_name, const RtfOptions& opt);

// The standard five-way comparison: KWS-only, DCCRN-KWS, +AudioBias, +FM, +CCL.
// `base` supplies the shared geometry; modes override projection/merge flags.
std::vector<RtfEntry> RtfComparison(const ModelConfig& base, uint64_t model_seed,
                                    const RtfOptions& opt);

}  // namespace dkws

#endif  // DKWS_EVALUATE_HPP_

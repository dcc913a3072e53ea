// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_STREAMING_HPP_
#define DKWS_STREAMING_HPP_

#include <vector>

#include "dkws/model.hpp"

namespace dkws {

struct Detection {
  int64_t frame = 0;
  double smoothed = 0.0;
  double threshold = 0.0;
};

// Moving average over the past `win` frames (shorter at the start).
std::vector<double> SmoothScores(const std::vector<double>& post, int win);

// Trigger whenever the smoothed score sits at or above the threshold and at
// least `refractory` frames have passed since the previous trigger.
std::vector<Detection> SmoothAndDecide(const std::vector<double>& post, double threshold,
                                       int smooth_win = 30, int refractory = 100);

// Tape-free frame-synchronous inference engine for the KWS branch. The
// enhancement decoder never runs here. Parameters are read from the model and
// must not change while a stream is open; per-stream causal state (frame
// buffer, convolution histories, merged-feature context) lives in the runner.
class StreamingRunner {
 public:
  explicit StreamingRunner(KwsModel& model);

  void reset();
  // Consume samples; returns the posteriors of all frames completed by them.
  std::vector<double> push(const double* samples, size_t n);
  std::vector<double> push(const AudioBuffer& audio);
  int64_t frames() const { return frame_count_; }

 private:
  double process_frame(const std::vector<double>& samples, size_t offset);
  void merged_column(const std::vector<std::vector<double>>& layer_re,
                     const std::vector<std::vector<double>>& layer_im,
                     std::vector<double>& er, std::vector<double>& ei);
  std::vector<double> project_column(const std::vector<double>& er,
                                     const std::vector<double>& ei);
  double classify_column(std::vector<double> col);

  KwsModel& model_;
  StftPlan plan_;
  Tensor mel_fb_;             // kws_only frontend
  std::vector<double> bias_;  // empty when the projection takes none
  std::vector<double> merge_norm_;  // per-layer weight / sum |w|

  std::vector<double> pending_;  // raw samples not yet consumed by a frame
  size_t pending_off_ = 0;
  int64_t frame_count_ = 0;

  // per-encoder-layer input column at t-1 (kernel time extent 2)
  std::vector<std::vector<double>> prev_re_, prev_im_;
  // merged-feature history for the context linear, newest first
  std::vector<std::vector<double>> hist_er_, hist_ei_;
  // per-DTC-block circular input history, laid out [slot][C]
  std::vector<std::vector<double>> dtc_hist_;
  std::vector<int> dtc_span_;  // history slots per block = (k-1)*dilation + 1
};

}  // namespace dkws

#endif  // DKWS_STREAMING_HPP_

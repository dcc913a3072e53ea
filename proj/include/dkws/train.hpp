// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_TRAIN_HPP_
#define DKWS_TRAIN_HPP_

#include <functional>
#include <string>
#include <vector>

#include "dkws/checkpoint.hpp"
#include "dkws/losses.hpp"
#include "dkws/model.hpp"
#include "dkws/simulate.hpp"

namespace dkws {

// Keyword-audio list feeding the context bias embedding.
struct BiasList {
  BiasMode mode = BiasMode::kFixed;
  std::vector<std::string> entry_ids;  // keyword utterance ids
  uint64_t seed = 0;

  void validate(const std::vector<ManifestEntry>& keywords) const;  // size <= 50 etc.
  void save(const std::string& path) const;
  static BiasList Load(const std::string& path);
};

// Draw a list of up to `size` keyword entries; speaker-dependent mode keeps a
// single speaker (the one owning the most entries unless `speaker` is given).
BiasList MakeBiasList(const std::vector<ManifestEntry>& keywords, BiasMode mode, int size,
                      uint64_t seed, const std::string& speaker = "");

// Load the listed utterances as audio.
std::vector<AudioBuffer> LoadBiasClips(const BiasList& list,
                                       const std::vector<ManifestEntry>& keywords,
                                       int sample_rate);

struct TrainConfig {
  int64_t iterations = 17500;
  int batch_positive = 1;  // utterances per iteration, positive:negative exactly
  int batch_negative = 1;
  NoamConfig noam;
  AdamConfig adam;
  uint64_t seed = 0;
  int64_t checkpoint_every = 500;
  std::string checkpoint_dir;
  int bias_sample = 3;     // clips drawn per step in varied mode
  int positive_window = 10;
  void validate() const;
};

struct TrainStats {
  int64_t iteration = 0;
  double loss = 0.0;
  double neg_si_snr = 0.0;  // enhancement term
  double bce = 0.0;
  double lr = 0.0;
  double frame_accuracy = 0.0;  // labeled frames, threshold 0.5
  std::vector<std::string> batch_ids;
};

class Trainer {
 public:
  Trainer(KwsModel& model, MixtureSampler sampler, TrainConfig cfg, BiasList bias_list);

  // Executes iterations [start, cfg.iterations]; cb fires once per iteration.
  using Callback = std::function<void(const TrainStats&)>;
  void run(const Callback& cb = nullptr);

  TrainStats step(int64_t iteration);  // 1-based
  // Restores model/optimizer/iteration from the newest checkpoint in the
  // checkpoint directory; returns the first iteration still to run.
  int64_t resume();
  int64_t next_iteration() const { return next_iter_; }
  AdamOptimizer& optimizer() { return opt_; }
  const StftPlan& plan() const { return plan_; }

 private:
  std::vector<AudioBuffer> bias_clips_for(int64_t iteration);
  void save_checkpoint(int64_t iteration);

  KwsModel& model_;
  MixtureSampler sampler_;
  TrainConfig cfg_;
  BiasList bias_list_;
  StftPlan plan_;
  AdamOptimizer opt_;
  std::vector<AudioBuffer> fixed_clips_;  // fixed / speaker-dependent modes
  int64_t next_iter_ = 1;
};

}  // namespace dkws

#endif  // DKWS_TRAIN_HPP_

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_LOSSES_HPP_
#define DKWS_LOSSES_HPP_

#include <vector>

#include "dkws/audio.hpp"
#include "dkws/autograd.hpp"
#include "dkws/nn.hpp"
#include "dkws/simulate.hpp"

namespace dkws {

// Scale-invariant SNR in dB (epsilon-guarded). Throws on zero-power reference.
double SiSnr(const AudioBuffer& est, const AudioBuffer& ref);
// Differentiable version; `ref` is a constant.
V SiSnrOp(Tape& t, V est, const std::vector<double>& ref);

// Mean binary cross entropy over non-ignored frames; posterior clamped to
// [1e-7, 1 - 1e-7]. Throws when every frame is ignored.
double BceMasked(const std::vector<double>& post, const LabelTrack& labels);
V BceMaskedOp(Tape& t, V post, const LabelTrack& labels);

struct NoamConfig {
  double factor = 5.0;
  int64_t warmup = 1000;
  int64_t d_model = 128;
};
// lr = factor * d_model^-1/2 * min(step^-1/2, step * warmup^-3/2); step >= 1.
double NoamLr(int64_t step, const NoamConfig& cfg);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(const ParamList& params, double lr);
  int64_t iterations() const { return t_; }
  void set_iterations(int64_t t) { t_ = t; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace dkws

#endif  // DKWS_LOSSES_HPP_

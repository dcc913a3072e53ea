// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace dkws {

namespace {
constexpr double kSiSnrEps = 1e-8;
constexpr double kBceClampLo = 1e-7;
constexpr double kBceClampHi = 1.0 - 1e-7;

double MeanOf(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}
}  // namespace

double SiSnr(const AudioBuffer& est, const AudioBuffer& ref) {
  if (est.samples.size() != ref.samples.size())
    throw std::invalid_argument("SiSnr: length mismatch");
  const size_t n = ref.samples.size();
  if (n == 0) throw std::invalid_argument("SiSnr: empty signals");
  double me = MeanOf(est.samples), mr = MeanOf(ref.samples);
  double dot = 0.0, rr = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double e = est.samples[i] - me, r = ref.samples[i] - mr;
    dot += e * r;
    rr += r * r;
  }
  if (rr <= 0.0) throw std::invalid_argument("SiSnr: zero-power reference");
  double alpha = dot / rr;
  double ps = 0.0, pe = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double e = est.samples[i] - me, r = ref.samples[i] - mr;
    double s_t = alpha * r;
    ps += s_t * s_t;
    double d = e - s_t;
    pe += d * d;
  }
  return 10.0 * std::log10((ps + kSiSnrEps) / (pe + kSiSnrEps));
}

V SiSnrOp(Tape& t, V est, const std::vector<double>& ref) {
  const int64_t n = t.val(est).numel();
  if (n != static_cast<int64_t>(ref.size()))
    throw std::invalid_argument("SiSnrOp: length mismatch");
  double mr = MeanOf(ref);
  Tensor ref_zm({n});
  double rr = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double r = ref[static_cast<size_t>(i)] - mr;
    ref_zm.v[static_cast<size_t>(i)] = r;
    rr += r * r;
  }
  if (rr <= 0.0) throw std::invalid_argument("SiSnrOp: zero-power reference");

  V flat = ag::reshape(t, est, {n});
  V mean = ag::mean_all(t, flat);
  V mean_vec = ag::scale_by(t, t.leaf(Full({n}, 1.0)), mean);
  V est_zm = ag::sub(t, flat, mean_vec);

  V dot = ag::sum_all(t, ag::mul_const(t, est_zm, ref_zm));
  V alpha = ag::affine(t, dot, 1.0 / rr, 0.0);
  V s_t = ag::scale_by(t, t.leaf(ref_zm), alpha);
  V e = ag::sub(t, est_zm, s_t);
  V ps = ag::sum_all(t, ag::square(t, s_t));
  V pe = ag::sum_all(t, ag::square(t, e));
  V num = ag::log_(t, ag::affine(t, ps, 1.0, kSiSnrEps));
  V den = ag::log_(t, ag::affine(t, pe, 1.0, kSiSnrEps));
  return ag::affine(t, ag::sub(t, num, den), 10.0 / std::log(10.0), 0.0);
}

double BceMasked(const std::vector<double>& post, const LabelTrack& labels) {
  if (post.size() != labels.size())
    throw std::invalid_argument("BceMasked: length mismatch");
  double loss = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < post.size(); ++i) {
    if (labels[i] == Label::Ignore) continue;
    double y = std::min(kBceClampHi, std::max(kBceClampLo, post[i]));
    double tgt = labels[i] == Label::Positive ? 1.0 : 0.0;
    loss -= tgt * std::log(y) + (1.0 - tgt) * std::log(1.0 - y);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("BceMasked: all frames ignored");
  return loss / static_cast<double>(n);
}

V BceMaskedOp(Tape& t, V post, const LabelTrack& labels) {
  const int64_t n = t.val(post).numel();
  if (n != static_cast<int64_t>(labels.size()))
    throw std::invalid_argument("BceMaskedOp: length mismatch");
  Tensor pos_mask({n}), neg_mask({n});
  int64_t labeled = 0;
  for (int64_t i = 0; i < n; ++i) {
    const Label l = labels[static_cast<size_t>(i)];
    if (l == Label::Ignore) continue;
    ++labeled;
    if (l == Label::Positive)
      pos_mask.v[static_cast<size_t>(i)] = 1.0;
    else
      neg_mask.v[static_cast<size_t>(i)] = 1.0;
  }
  if (labeled == 0) throw std::invalid_argument("BceMaskedOp: all frames ignored");
  V flat = ag::reshape(t, post, {n});
  V y = ag::clamp(t, flat, kBceClampLo, kBceClampHi);
  V log_y = ag::log_(t, y);
  V log_1my = ag::log_(t, ag::affine(t, y, -1.0, 1.0));
  V sum = ag::sum_all(t, ag::add(t, ag::mul_const(t, log_y, pos_mask),
                                 ag::mul_const(t, log_1my, neg_mask)));
  return ag::affine(t, sum, -1.0 / static_cast<double>(labeled), 0.0);
}

double NoamLr(int64_t step, const NoamConfig& cfg) {
  if (step < 1) throw std::invalid_argument("NoamLr: step must be >= 1");
  if (cfg.warmup < 1 || cfg.d_model < 1 || cfg.factor <= 0.0)
    throw std::invalid_argument("NoamLr: invalid schedule parameters");
  double s = static_cast<double>(step);
  double w = static_cast<double>(cfg.warmup);
  return cfg.factor / std::sqrt(static_cast<double>(cfg.d_model)) *
         std::min(1.0 / std::sqrt(s), s / (w * std::sqrt(w)));
}

void AdamOptimizer::step(const ParamList& params, double lr) {
  ++t_;
  const double b1c = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double b2c = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params) {
    const size_t n = p->value.v.size();
    for (size_t i = 0; i < n; ++i) {
      double g = p->grad.v[i];
      double m = cfg_.beta1 * p->adam_m.v[i] + (1.0 - cfg_.beta1) * g;
      double v = cfg_.beta2 * p->adam_v.v[i] + (1.0 - cfg_.beta2) * g * g;
      p->adam_m.v[i] = m;
      p->adam_v.v[i] = v;
      p->value.v[i] -= lr * (m / b1c) / (std::sqrt(v / b2c) + cfg_.eps);
    }
  }
}

}  // namespace dkws

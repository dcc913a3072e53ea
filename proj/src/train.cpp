// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace dkws {

namespace {
constexpr int kMaxBiasList = 50;

std::map<std::string, const ManifestEntry*> ById(const std::vector<ManifestEntry>& entries) {
  std::map<std::string, const ManifestEntry*> m;
  for (const auto& e : entries) m[e.id] = &e;
  return m;
}
}  // namespace

void BiasList::validate(const std::vector<ManifestEntry>& keywords) const {
  if (mode == BiasMode::kLearnable) {
    if (!entry_ids.empty())
      throw std::invalid_argument("BiasList: learnable mode takes no audio entries");
    return;
  }
  if (entry_ids.empty()) throw std::invalid_argument("BiasList: empty non-learnable list");
  if (entry_ids.size() > kMaxBiasList)
    throw std::invalid_argument("BiasList: more than 50 entries");
  auto by_id = ById(keywords);
  std::string speaker;
  for (const auto& id : entry_ids) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw std::invalid_argument("BiasList: unknown keyword utterance '" + id + "'");
    if (it->second->type != "keyword")
      throw std::invalid_argument("BiasList: entry '" + id + "' is not keyword-type");
    if (mode == BiasMode::kSpeakerDependent) {
      if (speaker.empty())
        speaker = it->second->speaker;
      else if (speaker != it->second->speaker)
        throw std::invalid_argument("BiasList: speaker-dependent list mixes speakers '" +
                                    speaker + "' and '" + it->second->speaker + "'");
    }
  }
}

void BiasList::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("BiasList: cannot write " + path);
  os << "mode " << to_string(mode) << "\n";
  os << "seed " << seed << "\n";
  for (const auto& id : entry_ids) os << "entry " << id << "\n";
  if (!os) throw std::runtime_error("BiasList: write failed for " + path);
}

BiasList BiasList::Load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("BiasList: cannot read " + path);
  BiasList list;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "mode") {
      std::string m;
      ls >> m;
      list.mode = bias_mode_from_string(m);
    } else if (key == "seed") {
      ls >> list.seed;
    } else if (key == "entry") {
      std::string id;
      ls >> id;
      list.entry_ids.push_back(id);
    } else {
      throw std::runtime_error("BiasList: unknown key '" + key + "' in " + path);
    }
    if (!ls) throw std::runtime_error("BiasList: malformed line in " + path + ": " + line);
  }
  return list;
}

BiasList MakeBiasList(const std::vector<ManifestEntry>& keywords, BiasMode mode, int size,
                      uint64_t seed, const std::string& speaker) {
  BiasList list;
  list.mode = mode;
  list.seed = seed;
  if (mode == BiasMode::kLearnable) return list;
  if (size < 1 || size > kMaxBiasList)
    throw std::invalid_argument("MakeBiasList: size must lie in [1, 50]");

  std::vector<const ManifestEntry*> pool;
  for (const auto& e : keywords)
    if (e.type == "keyword") pool.push_back(&e);
  if (mode == BiasMode::kSpeakerDependent) {
    std::string spk = speaker;
    if (spk.empty()) {  // majority speaker
      std::map<std::string, int> counts;
      for (const auto* e : pool) ++counts[e->speaker];
      int best = -1;
      for (const auto& [s, n] : counts)
        if (n > best) {
          best = n;
          spk = s;
        }
    }
    std::vector<const ManifestEntry*> filtered;
    for (const auto* e : pool)
      if (e->speaker == spk) filtered.push_back(e);
    pool = std::move(filtered);
  }
  if (pool.empty()) throw std::invalid_argument("MakeBiasList: no eligible keyword entries");

  Rng rng(Rng::derive(seed, 0xb115));
  std::vector<size_t> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
  size_t take = std::min(static_cast<size_t>(size), pool.size());
  for (size_t i = 0; i < take; ++i) list.entry_ids.push_back(pool[order[i]]->id);
  std::sort(list.entry_ids.begin(), list.entry_ids.end());
  return list;
}

std::vector<AudioBuffer> LoadBiasClips(const BiasList& list,
                                       const std::vector<ManifestEntry>& keywords,
                                       int sample_rate) {
  list.validate(keywords);
  auto by_id = ById(keywords);
  std::vector<AudioBuffer> clips;
  clips.reserve(list.entry_ids.size());
  for (const auto& id : list.entry_ids)
    clips.push_back(ReadWav(by_id.at(id)->path, sample_rate));
  return clips;
}

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations >= 1");
  if (noam.warmup < 1) throw std::invalid_argument("TrainConfig: warmup >= 1");
  if (batch_positive < 0 || batch_negative < 0 || batch_positive + batch_negative < 1)
    throw std::invalid_argument("TrainConfig: batch must contain at least one utterance");
  if (checkpoint_every < 1) throw std::invalid_argument("TrainConfig: checkpoint_every >= 1");
  if (bias_sample < 1) throw std::invalid_argument("TrainConfig: bias_sample >= 1");
  if (positive_window < 1) throw std::invalid_argument("TrainConfig: positive_window >= 1");
}

Trainer::Trainer(KwsModel& model, MixtureSampler sampler, TrainConfig cfg, BiasList bias_list)
    : model_(model),
      sampler_(std::move(sampler)),
      cfg_(std::move(cfg)),
      bias_list_(std::move(bias_list)),
      plan_(model.config().spectro, model.config().sample_rate),
      opt_(cfg_.adam) {
  cfg_.validate();
  const bool needs_bias =
      model_.config().projection != ProjectionMode::kPlain && !model_.config().kws_only;
  if (needs_bias && bias_list_.mode != model_.config().bias_mode)
    throw std::invalid_argument("Trainer: bias list mode disagrees with the model config");
  if (needs_bias && bias_list_.mode != BiasMode::kLearnable &&
      bias_list_.mode != BiasMode::kVaried)
    fixed_clips_ =
        LoadBiasClips(bias_list_, sampler_.keyword_entries(), model_.config().sample_rate);
}

std::vector<AudioBuffer> Trainer::bias_clips_for(int64_t iteration) {
  const ModelConfig& mc = model_.config();
  if (mc.projection == ProjectionMode::kPlain || mc.kws_only ||
      mc.bias_mode == BiasMode::kLearnable)
    return {};
  if (mc.bias_mode != BiasMode::kVaried) return fixed_clips_;
  // varied: resample a fresh sub-list from the keyword pool every step
  const auto& pool = sampler_.keyword_entries();
  if (pool.empty()) throw std::runtime_error("Trainer: empty keyword pool for varied bias");
  Rng rng(Rng::derive(cfg_.seed, 0xb1a5000000000000ULL + static_cast<uint64_t>(iteration)));
  std::vector<size_t> order(pool.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
  size_t take = std::min(static_cast<size_t>(cfg_.bias_sample), pool.size());
  std::vector<AudioBuffer> clips;
  for (size_t i = 0; i < take; ++i)
    clips.push_back(ReadWav(pool[order[i]].path, mc.sample_rate));
  return clips;
}

TrainStats Trainer::step(int64_t iteration) {
  const int B = cfg_.batch_positive + cfg_.batch_negative;
  TrainStats stats;
  stats.iteration = iteration;
  stats.lr = NoamLr(iteration, cfg_.noam);

  ParamList params = model_.params();
  for (Param* p : params) p->zero_grad();

  std::vector<AudioBuffer> clips = bias_clips_for(iteration);
  int64_t correct = 0, labeled = 0;
  for (int s = 0; s < B; ++s) {
    const bool want_kw = s < cfg_.batch_positive;
    const uint64_t index = static_cast<uint64_t>(iteration - 1) * static_cast<uint64_t>(B) +
                           static_cast<uint64_t>(s);
    MixtureSampler::Sample sample = sampler_.draw(index, want_kw);
    stats.batch_ids.push_back(sample.utterance_id);

    const int64_t T = plan_.num_frames(sample.pair.noisy.size());
    int64_t end_frame = -1;
    if (sample.is_keyword)
      end_frame = std::min<int64_t>(
          T - 1, static_cast<int64_t>(sample.pair.keyword_end_s * model_.config().sample_rate) /
                     plan_.hop());
    LabelTrack labels =
        LabelFrames(end_frame, T, sample.is_keyword, cfg_.positive_window);

    Tape t;
    V posteriors = -1;
    V loss = -1;
    if (model_.config().kws_only) {
      // standalone detector baseline: log-mel in, detection loss only
      Tensor mel = LogMel(sample.pair.noisy, model_.config().mel_bins, model_.config().spectro);
      posteriors = model_.forward_kws_only(t, mel, true);
      loss = BceMaskedOp(t, posteriors, labels);
      stats.bce += t.scalar(loss) / B;
      stats.loss += t.scalar(loss) / B;
    } else {
      ComplexSpectrogram spec = plan_.stft(sample.pair.noisy);
      std::vector<double> target(sample.pair.target.samples.begin(),
                                 sample.pair.target.samples.begin() +
                                     static_cast<int64_t>(plan_.num_samples(T)));
      V bias = model_.resolve_bias(t, clips, true);
      ForwardResult r = model_.forward(t, spec, bias, true, &plan_);
      posteriors = r.posteriors;
      V enh_term = ag::neg(t, SiSnrOp(t, r.enhanced, target));
      V bce_term = BceMaskedOp(t, posteriors, labels);
      loss = ag::add(t, enh_term, bce_term);
      stats.neg_si_snr += t.scalar(enh_term) / B;
      stats.bce += t.scalar(bce_term) / B;
      stats.loss += t.scalar(loss) / B;
    }
    t.backward(ag::affine(t, loss, 1.0 / B, 0.0));

    const Tensor& post = t.val(posteriors);
    for (int64_t f = 0; f < T; ++f) {
      if (labels[static_cast<size_t>(f)] == Label::Ignore) continue;
      ++labeled;
      bool hit = post.v[static_cast<size_t>(f)] >= 0.5;
      if (hit == (labels[static_cast<size_t>(f)] == Label::Positive)) ++correct;
    }
  }
  stats.frame_accuracy = labeled ? static_cast<double>(correct) / labeled : 0.0;

  if (!std::isfinite(stats.loss)) {
    std::ostringstream os;
    os << "Trainer: non-finite loss at iteration " << iteration << " (lr=" << stats.lr
       << ", batch=";
    for (size_t i = 0; i < stats.batch_ids.size(); ++i)
      os << (i ? "," : "") << stats.batch_ids[i];
    os << ")";
    throw std::runtime_error(os.str());
  }

  opt_.step(params, stats.lr);
  if (!cfg_.checkpoint_dir.empty() &&
      (iteration % cfg_.checkpoint_every == 0 || iteration == cfg_.iterations))
    save_checkpoint(iteration);
  next_iter_ = iteration + 1;
  return stats;
}

void Trainer::save_checkpoint(int64_t iteration) {
  std::filesystem::create_directories(cfg_.checkpoint_dir);
  std::string path = cfg_.checkpoint_dir + "/ckpt_" + std::to_string(iteration) + ".ckpt";
  SaveCheckpoint(path, model_, iteration, &opt_);
  SaveCheckpoint(cfg_.checkpoint_dir + "/latest.ckpt", model_, iteration, &opt_);
}

int64_t Trainer::resume() {
  if (cfg_.checkpoint_dir.empty()) return next_iter_;
  std::string path = cfg_.checkpoint_dir + "/latest.ckpt";
  if (!std::filesystem::exists(path)) return next_iter_;
  CheckpointMeta meta = LoadCheckpoint(path, model_, &opt_);
  next_iter_ = meta.iteration + 1;
  return next_iter_;
}

void Trainer::run(const Callback& cb) {
  for (int64_t it = next_iter_; it <= cfg_.iterations; ++it) {
    TrainStats stats = step(it);
    if (cb) cb(stats);
  }
}

}  // namespace dkws

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dkws/checkpoint.hpp"
#include "dkws/config.hpp"
#include "dkws/corpus_gen.hpp"
#include "dkws/evaluate.hpp"
#include "dkws/streaming.hpp"
#include "dkws/train.hpp"

namespace dkws {

namespace {

namespace fs = std::filesystem;

std::string default_config_dir() {
  const char* env = std::getenv("DKWS_CONFIG_DIR");
  return env ? env : "";
}

std::string locate_config(const std::string& given) {
  if (given.empty()) throw std::runtime_error("missing --config");
  if (fs::exists(given)) return given;
  std::string dir = default_config_dir();
  if (!dir.empty() && fs::exists(fs::path(dir) / given)) return (fs::path(dir) / given).string();
  throw std::runtime_error("config file not found: " + given);
}

struct ModeOverrides {
  std::string projection, bias_mode, feature_merge;
  std::string checkpoint_dir;
  int64_t iterations = -1;
  uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig load_config(const std::string& path, const ModeOverrides& ov) {
  RunConfig rc = RunConfig::FromFile(locate_config(path));
  if (!ov.projection.empty()) rc.model.projection = projection_from_string(ov.projection);
  if (!ov.bias_mode.empty()) rc.model.bias_mode = bias_mode_from_string(ov.bias_mode);
  if (!ov.feature_merge.empty()) {
    if (ov.feature_merge == "on")
      rc.model.feature_merge = true;
    else if (ov.feature_merge == "off")
      rc.model.feature_merge = false;
    else
      throw std::runtime_error("--feature-merge expects on|off");
  }
  if (!ov.checkpoint_dir.empty()) rc.train.checkpoint_dir = ov.checkpoint_dir;
  if (ov.iterations > 0) rc.train.iterations = ov.iterations;
  if (ov.seed_set) rc.train.seed = ov.seed;
  rc.model.validate();
  return rc;
}

std::vector<ManifestEntry> load_manifest_checked(const std::string& path,
                                                 const std::string& what) {
  if (path.empty()) throw std::runtime_error("config is missing the " + what + " manifest");
  return LoadManifest(path);
}

// Resolve (or build) the bias list and cache the inference embedding.
BiasList prepare_bias(KwsModel& model, const RunConfig& rc,
                      const std::vector<ManifestEntry>& speech, bool cache_embedding) {
  BiasList list;
  list.mode = model.config().bias_mode;
  const ModelConfig& mc = model.config();
  if (mc.kws_only || mc.projection == ProjectionMode::kPlain ||
      mc.bias_mode == BiasMode::kLearnable)
    return list;
  if (!rc.bias_list_path.empty()) {
    list = BiasList::Load(rc.bias_list_path);
    if (list.mode != mc.bias_mode)
      throw std::runtime_error("bias list mode '" + to_string(list.mode) +
                               "' disagrees with model bias mode '" + to_string(mc.bias_mode) +
                               "'");
  } else {
    list = MakeBiasList(speech, mc.bias_mode, 50, rc.train.seed);
  }
  if (cache_embedding && !model.has_cached_bias()) {
    std::vector<AudioBuffer> clips = LoadBiasClips(list, speech, mc.sample_rate);
    model.set_cached_bias(model.compute_bias_embedding(clips));
  }
  return list;
}

void write_resolved(const RunConfig& rc, const std::string& out_dir) {
  fs::create_directories(out_dir);
  rc.write_resolved((fs::path(out_dir) / "resolved.conf").string());
}

// ------------------------------------------------------------------ simulate
int cmd_simulate(const RunConfig& rc, int count, const std::string& out_dir) {
  auto speech = load_manifest_checked(rc.speech_manifest, "speech");
  auto noise = load_manifest_checked(rc.noise_manifest, "noise");
  MixtureSampler sampler(speech, noise, rc.sim, rc.model.sample_rate, rc.train.seed);
  fs::create_directories(fs::path(out_dir) / "wav");
  write_resolved(rc, out_dir);

  std::ofstream tsv(fs::path(out_dir) / "mixtures.tsv");
  tsv << "id\tnoisy\ttarget\tis_keyword\tsnr_db\tkeyword_end_s\tsource\n";
  for (int i = 0; i < count; ++i) {
    bool kw = i % 2 == 0;
    auto s = sampler.draw(static_cast<uint64_t>(i), kw);
    std::string id = "mix" + std::to_string(i);
    std::string noisy = (fs::path(out_dir) / "wav" / (id + "_noisy.wav")).string();
    std::string target = (fs::path(out_dir) / "wav" / (id + "_target.wav")).string();
    WriteWav(noisy, s.pair.noisy);
    WriteWav(target, s.pair.target);
    tsv << id << "\t" << noisy << "\t" << target << "\t" << (s.is_keyword ? 1 : 0) << "\t"
        << s.pair.meta.snr_db << "\t" << s.pair.keyword_end_s << "\t" << s.utterance_id
        << "\n";
  }
  std::cout << "wrote " << count << " mixtures under " << out_dir << "\n";
  return 0;
}

// ------------------------------------------------------------- make-bias-list
int cmd_make_bias_list(const RunConfig& rc, const std::string& mode_str, int size,
                       const std::string& speaker, const std::string& out_path) {
  auto speech = load_manifest_checked(rc.speech_manifest, "speech");
  BiasMode mode = mode_str.empty() ? rc.model.bias_mode : bias_mode_from_string(mode_str);
  BiasList list = MakeBiasList(speech, mode, size, rc.train.seed, speaker);
  list.save(out_path);
  std::cout << "wrote bias list (" << list.entry_ids.size() << " entries, mode "
            << to_string(mode) << ") to " << out_path << "\n";
  return 0;
}

// ----------------------------------------------------------------------- train
int cmd_train(RunConfig rc, bool resume, int log_every) {
  auto speech = load_manifest_checked(rc.speech_manifest, "speech");
  auto noise = load_manifest_checked(rc.noise_manifest, "noise");
  if (!rc.test_speech_manifest.empty()) {
    auto test_speech = LoadManifest(rc.test_speech_manifest);
    auto test_all = test_speech;
    if (!rc.test_noise_manifest.empty()) {
      auto tn = LoadManifest(rc.test_noise_manifest);
      test_all.insert(test_all.end(), tn.begin(), tn.end());
    }
    auto train_all = speech;
    train_all.insert(train_all.end(), noise.begin(), noise.end());
    ValidateDisjoint(train_all, test_all);
  }
  if (rc.train.checkpoint_dir.empty())
    rc.train.checkpoint_dir = (fs::path(rc.out_dir) / "checkpoints").string();
  write_resolved(rc, rc.out_dir);

  KwsModel model(rc.model, rc.train.seed);
  BiasList list = prepare_bias(model, rc, speech, /*cache_embedding=*/false);
  MixtureSampler sampler(speech, noise, rc.sim, rc.model.sample_rate, rc.train.seed);
  Trainer trainer(model, std::move(sampler), rc.train, list);
  if (resume) {
    int64_t next = trainer.resume();
    std::cout << "resumed at iteration " << next << "\n";
  }
  trainer.run([&](const TrainStats& s) {
    if (log_every > 0 && (s.iteration % log_every == 0 || s.iteration == 1))
      std::cout << "iter " << s.iteration << " loss " << s.loss << " (enh " << s.neg_si_snr
                << ", bce " << s.bce << ") lr " << s.lr << " acc " << s.frame_accuracy
                << "\n";
  });

  // cache the inference-time bias embedding into the final checkpoint
  if (!rc.model.kws_only && rc.model.projection != ProjectionMode::kPlain &&
      rc.model.bias_mode != BiasMode::kLearnable) {
    std::vector<AudioBuffer> clips = LoadBiasClips(list, speech, rc.model.sample_rate);
    model.set_cached_bias(model.compute_bias_embedding(clips));
  }
  fs::create_directories(rc.train.checkpoint_dir);
  std::string final_path = (fs::path(rc.train.checkpoint_dir) / "final.ckpt").string();
  SaveCheckpoint(final_path, model, rc.train.iterations, &trainer.optimizer());
  std::cout << "wrote " << final_path << "\n";
  return 0;
}

// ------------------------------------------------------------ scoring helpers
struct ScoredSet {
  std::vector<double> pos, neg;
  double negative_hours = 0.0;
};

ScoredSet score_test_set(KwsModel& model, const RunConfig& rc, double snr_db, int count,
                         uint64_t seed) {
  auto speech = load_manifest_checked(rc.test_speech_manifest, "test speech");
  auto noise = load_manifest_checked(
      rc.test_noise_manifest.empty() ? rc.noise_manifest : rc.test_noise_manifest,
      "test noise");
  SimRanges ranges = rc.sim;
  ranges.snr_lo = ranges.snr_hi = snr_db;
  MixtureSampler sampler(speech, noise, ranges, rc.model.sample_rate, seed);
  StftPlan plan(rc.model.spectro, rc.model.sample_rate);

  ScoredSet out;
  for (int i = 0; i < count; ++i) {
    auto p = sampler.draw(static_cast<uint64_t>(i), true);
    out.pos.push_back(
        UtteranceScore(OfflinePosteriors(model, plan, p.pair.noisy, {}), rc.smooth_win));
    auto n = sampler.draw(static_cast<uint64_t>(i), false);
    out.neg.push_back(
        UtteranceScore(OfflinePosteriors(model, plan, n.pair.noisy, {}), rc.smooth_win));
    out.negative_hours += n.pair.noisy.duration_s() / 3600.0;
  }
  return out;
}

std::unique_ptr<KwsModel> load_model(const RunConfig& rc, const std::string& ckpt) {
  auto model = std::make_unique<KwsModel>(rc.model, rc.train.seed);
  if (!ckpt.empty()) LoadCheckpoint(ckpt, *model);
  // an uncached non-learnable bias embedding is resolved from the bias list
  if (!model->has_cached_bias() && !rc.model.kws_only &&
      rc.model.projection != ProjectionMode::kPlain &&
      rc.model.bias_mode != BiasMode::kLearnable) {
    auto speech = load_manifest_checked(rc.speech_manifest, "speech");
    prepare_bias(*model, rc, speech, /*cache_embedding=*/true);
  }
  return model;
}

// -------------------------------------------------------------------- eval-roc
int cmd_eval_roc(const RunConfig& rc, const std::string& ckpt, double snr, int count,
                 const std::string& out_dir) {
  auto model = load_model(rc, ckpt);
  ScoredSet s = score_test_set(*model, rc, snr, count, rc.train.seed + 1);
  auto curve = RocCurve(s.pos, s.neg, s.negative_hours);
  double auc = RocAuc(curve);
  fs::create_directories(out_dir);
  write_resolved(rc, out_dir);
  std::ofstream os(fs::path(out_dir) / "roc.tsv");
  os << "threshold\tfalse_reject\tfalse_alarm\tfalse_alarms_per_hour\n";
  os.precision(10);
  for (const auto& p : curve)
    os << p.threshold << "\t" << p.false_reject << "\t" << p.false_alarm << "\t"
       << p.false_alarms_per_hour << "\n";
  std::ofstream sum(fs::path(out_dir) / "summary.txt");
  sum << "auc = " << auc << "\nsnr_db = " << snr << "\npositives = " << s.pos.size()
      << "\nnegatives = " << s.neg.size() << "\nfa_axis = per-utterance (per-hour column included)\n";
  std::cout << "auc " << auc << " at " << snr << " dB over " << count
            << "+" << count << " clips; wrote " << out_dir << "/roc.tsv\n";
  return 0;
}

// ------------------------------------------------------------------- eval-wake
int cmd_eval_wake(const RunConfig& rc, const std::string& ckpt, double snr, int count,
                  const std::string& out_dir) {
  auto model = load_model(rc, ckpt);
  ScoredSet s = score_test_set(*model, rc, snr, count, rc.train.seed + 2);
  WakeResult w = WakeAccuracy(s.pos, s.neg, s.negative_hours);
  fs::create_directories(out_dir);
  write_resolved(rc, out_dir);
  std::ofstream sum(fs::path(out_dir) / "wake.txt");
  sum << "accuracy = " << w.accuracy << "\nthreshold = " << w.threshold
      << "\nfalse_alarms = " << w.false_alarms << "\nbudget = " << w.budget
      << "\nbudget_met = " << (w.budget_met ? "true" : "false")
      << "\nnegative_hours = " << w.negative_hours << "\nsnr_db = " << snr << "\n";
  std::cout << "wake accuracy " << w.accuracy << " at threshold " << w.threshold << " ("
            << w.false_alarms << "/" << w.budget << " false alarms"
            << (w.budget_met ? "" : ", budget NOT met") << ")\n";
  return 0;
}

// ---------------------------------------------------------------------- stream
int cmd_stream(const RunConfig& rc, const std::string& ckpt, const std::string& wav,
               double threshold) {
  auto model = load_model(rc, ckpt);
  AudioBuffer audio = ReadWav(wav, rc.model.sample_rate);
  StreamingRunner runner(*model);
  std::vector<double> post = runner.push(audio);
  auto detections = SmoothAndDecide(post, threshold, rc.smooth_win, rc.refractory);
  double hop_s = static_cast<double>(runner.frames() ? 1 : 1) *
                 rc.model.spectro.hop(rc.model.sample_rate) /
                 static_cast<double>(rc.model.sample_rate);
  for (const auto& d : detections)
    std::cout << "detect frame " << d.frame << " time "
              << static_cast<double>(d.frame) * hop_s << " score " << d.smoothed << "\n";
  if (detections.empty()) std::cout << "no detections (" << post.size() << " frames)\n";
  return 0;
}

// -------------------------------------------------------------------- bench-rtf
int cmd_bench_rtf(const RunConfig& rc, double seconds, double warmup) {
  RtfOptions opt;
  opt.audio_seconds = seconds;
  opt.warmup_seconds = warmup;
  opt.seed = rc.train.seed;
  auto entries = RtfComparison(rc.model, rc.train.seed, opt);
  std::cout << "mode\taudio_s\tprocess_s\trtf\n";
  for (const auto& e : entries)
    std::cout << e.mode << "\t" << e.audio_seconds << "\t" << e.process_seconds << "\t"
              << e.rtf << "\n";
  return 0;
}

// ----------------------------------------------------------------- export-energy
int cmd_export_energy(const RunConfig& rc, const std::string& ckpt, const std::string& wav,
                      const std::string& out_path) {
  auto model = load_model(rc, ckpt);
  AudioBuffer audio = ReadWav(wav, rc.model.sample_rate);
  StftPlan plan(rc.model.spectro, rc.model.sample_rate);
  EnergyTable table = ExportEnergy(*model, plan, audio, {});
  WriteEnergyTable(out_path, table);
  std::cout << "wrote " << table.layers.size() << " layer rows + merged row to " << out_path
            << "\n";
  return 0;
}

// ------------------------------------------------------------------------ plot
int cmd_plot(const std::string& table_path, const std::string& out_path, int width) {
  std::ifstream is(table_path);
  if (!is) throw std::runtime_error("cannot read energy table " + table_path);
  std::ostringstream out;
  const char* shades = " .:-=+*#%@";
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string name;
    ls >> name;
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty()) continue;
    double lo = vals[0], hi = vals[0];
    for (double x : vals) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    double span = hi - lo > 0 ? hi - lo : 1.0;
    out << name;
    for (size_t i = name.size(); i < 12; ++i) out << ' ';
    out << '|';
    for (int c = 0; c < width; ++c) {
      size_t idx = vals.size() * static_cast<size_t>(c) / static_cast<size_t>(width);
      int level = static_cast<int>((vals[idx] - lo) / span * 9.0 + 0.5);
      out << shades[std::clamp(level, 0, 9)];
    }
    out << "|\n";
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    std::ofstream os(out_path);
    os << out.str();
    std::cout << "wrote plot to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"desk-scale denoising keyword spotter"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt, wav_path, mode_str, speaker, out_path, table_path;
  ModeOverrides ov;
  int count = 10, size = 50, log_every = 10, width = 80;
  double snr = 0.0, seconds = 60.0, warmup = 5.0, threshold = -1.0;
  bool resume = false;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run configuration file")->required();
    sub->add_option("--projection", ov.projection, "plain|bias|ccl");
    sub->add_option("--bias-mode", ov.bias_mode, "fixed|varied|speaker|learnable");
    sub->add_option("--feature-merge", ov.feature_merge, "on|off");
    sub->add_option("--seed", ov.seed, "seed override")->each([&](std::string) {
      ov.seed_set = true;
    });
  };

  CLI::App* sim = app.add_subcommand("simulate", "write noisy/target mixture pairs");
  add_config(sim);
  sim->add_option("-n,--count", count, "mixtures to generate");
  sim->add_option("-o,--out", out_dir, "output directory");

  CLI::App* mbl = app.add_subcommand("make-bias-list", "choose keyword audio for the bias");
  add_config(mbl);
  mbl->add_option("--mode", mode_str, "fixed|varied|speaker|learnable");
  mbl->add_option("--size", size, "entries (max 50)");
  mbl->add_option("--speaker", speaker, "speaker id for speaker mode");
  mbl->add_option("-o,--out", out_path, "list file to write")->required();

  CLI::App* tr = app.add_subcommand("train", "run the multi-task training loop");
  add_config(tr);
  tr->add_option("--checkpoint-dir", ov.checkpoint_dir, "checkpoint directory override");
  tr->add_option("--iterations", ov.iterations, "iteration count override");
  tr->add_flag("--resume", resume, "continue from the newest checkpoint");
  tr->add_option("--log-every", log_every, "progress line interval (0 = quiet)");

  CLI::App* roc = app.add_subcommand("eval-roc", "score a test set and write the ROC");
  add_config(roc);
  roc->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  roc->add_option("--snr", snr, "test mixing SNR in dB");
  roc->add_option("-n,--count", count, "positive and negative clips each");
  roc->add_option("-o,--out", out_dir, "report directory");

  CLI::App* wake = app.add_subcommand("eval-wake", "wake accuracy under the FA budget");
  add_config(wake);
  wake->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  wake->add_option("--snr", snr, "test mixing SNR in dB");
  wake->add_option("-n,--count", count, "positive and negative clips each");
  wake->add_option("-o,--out", out_dir, "report directory");

  CLI::App* st = app.add_subcommand("stream", "frame-synchronous detection on a WAV");
  add_config(st);
  st->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  st->add_option("--wav", wav_path, "input audio")->required();
  st->add_option("--threshold", threshold, "detection threshold (default from config)");

  CLI::App* rtf = app.add_subcommand("bench-rtf", "single-thread real-time factors");
  add_config(rtf);
  rtf->add_option("--seconds", seconds, "measured audio span");
  rtf->add_option("--warmup", warmup, "untimed warmup span");

  CLI::App* en = app.add_subcommand("export-energy", "per-layer frame energies");
  add_config(en);
  en->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
  en->add_option("--wav", wav_path, "input audio")->required();
  en->add_option("-o,--out", out_path, "table file to write")->required();

  CLI::App* pl = app.add_subcommand("plot", "render an energy table as text panels");
  pl->add_option("--table", table_path, "energy table from export-energy")->required();
  pl->add_option("-o,--out", out_path, "output file (default stdout)");
  pl->add_option("--width", width, "panel width in characters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (pl->parsed()) return cmd_plot(table_path, out_path, width);
    RunConfig rc = load_config(config_path, ov);
    if (out_dir.empty()) out_dir = rc.out_dir;
    if (threshold < 0.0) threshold = rc.threshold;
    if (sim->parsed()) return cmd_simulate(rc, count, out_dir);
    if (mbl->parsed()) return cmd_make_bias_list(rc, mode_str, size, speaker, out_path);
    if (tr->parsed()) return cmd_train(rc, resume, log_every);
    if (roc->parsed()) return cmd_eval_roc(rc, ckpt, snr, count, out_dir);
    if (wake->parsed()) return cmd_eval_wake(rc, ckpt, snr, count, out_dir);
    if (st->parsed()) return cmd_stream(rc, ckpt, wav_path, threshold);
    if (rtf->parsed()) return cmd_bench_rtf(rc, seconds, warmup);
    if (en->parsed()) return cmd_export_energy(rc, ckpt, wav_path, out_path);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dkws

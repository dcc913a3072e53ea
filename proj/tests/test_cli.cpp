// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dkws/cli.hpp"
#include "dkws/config.hpp"
#include "dkws/corpus_gen.hpp"

using namespace dkws;
namespace fs = std::filesystem;

namespace {

int RunCli(std::vector<std::string> args) {
  args.insert(args.begin(), "dkws");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string TmpDir(const std::string& name) {
  auto p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string Slurp(const std::string& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Toy-scale run configuration over a freshly generated synthetic corpus.
std::string WriteToySetup(const std::string& dir, const std::string& extra = "") {
  CorpusSpec train_spec;
  train_spec.out_dir = dir + "/train_corpus";
  train_spec.prefix = "tr";
  train_spec.n_keywords = 6;
  train_spec.n_negatives = 6;
  train_spec.n_noise = 2;
  train_spec.seed = 5;
  CorpusPaths train_paths = GenerateSyntheticCorpus(train_spec);

  CorpusSpec test_spec = train_spec;
  test_spec.out_dir = dir + "/test_corpus";
  test_spec.prefix = "te";
  test_spec.speaker_offset = 4;  // disjoint speakers
  test_spec.seed = 6;
  CorpusPaths test_paths = GenerateSyntheticCorpus(test_spec);

  std::string conf = dir + "/run.conf";
  std::ofstream os(conf);
  os << "# toy-scale run\n"
     << "sample_rate = 2000\n"
     << "fft_size = 32\nwin_samples = 32\nhop_samples = 16\n"
     << "encoder_channels = 4,8\n"
     << "lstm_hidden = 8\nlstm_layers = 1\nlstm_proj = 8\n"
     << "kws_dim = 8\ndtc_blocks = 2\ndtc_kernel = 3\ndilation_cycle = 1,2\n"
     << "context_frames = 3\n"
     << "bias_dim = 8\nmel_bins = 8\nbias_channels = 8\nbias_blocks = 2\nbias_att_dim = 4\n"
     << "iterations = 2\ncheckpoint_every = 2\nseed = 5\nd_model = 8\n"
     << "rt60_lo = 0.05\nrt60_hi = 0.25\nn_noise_hi = 2\n"
     << "speech_manifest = " << train_paths.speech_manifest << "\n"
     << "noise_manifest = " << train_paths.noise_manifest << "\n"
     << "test_speech_manifest = " << test_paths.speech_manifest << "\n"
     << "test_noise_manifest = " << test_paths.noise_manifest << "\n"
     << "out_dir = " << dir << "/out\n"
     << extra;
  return conf;
}

}  // namespace

TEST_CASE("kv config parsing") {
  KvConfig kv = KvConfig::FromString(
      "a = 1\n"
      "# comment\n"
      "b = hello world # trailing comment\n"
      "c = 2.5\n"
      "flag1 = on\nflag2 = FALSE\n"
      "list = 1, 2,3\n",
      "test.conf");
  CHECK(kv.get_int("a", 0) == 1);
  CHECK(kv.get_string("b", "") == "hello world");
  CHECK(kv.get_double("c", 0.0) == doctest::Approx(2.5));
  CHECK(kv.get_bool("flag1", false));
  CHECK(!kv.get_bool("flag2", true));
  CHECK(kv.get_int_list("list", {}) == std::vector<int>{1, 2, 3});
  // fallbacks for absent keys
  CHECK(kv.get_int("missing", 42) == 42);
  CHECK(kv.get_string("missing", "d") == "d");
  CHECK_NOTHROW(kv.reject_unknown());

  // duplicate keys are rejected at parse time, pointing at both lines
  try {
    KvConfig::FromString("x = 1\nx = 2\n", "dup.conf");
    FAIL("expected duplicate-key error");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    CHECK(msg.find("dup.conf:2") != std::string::npos);
    CHECK(msg.find("duplicate") != std::string::npos);
  }

  // malformed lines carry the origin and line number
  CHECK_THROWS(KvConfig::FromString("novalue\n"));
  CHECK_THROWS(KvConfig::FromString("= 3\n"));

  // type errors name the key, file, and line
  KvConfig bad = KvConfig::FromString("n = seven\n", "t.conf");
  try {
    bad.get_int("n", 0);
    FAIL("expected type error");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    CHECK(msg.find("t.conf:1") != std::string::npos);
    CHECK(msg.find("'n'") != std::string::npos);
  }
  CHECK_THROWS(KvConfig::FromString("v = 1.5\n").get_int("v", 0));
  CHECK_THROWS(KvConfig::FromString("v = maybe\n").get_bool("v", false));
  CHECK_THROWS(KvConfig::FromString("v = 1,x\n").get_int_list("v", {}));

  // unconsumed keys are reported with locations
  KvConfig extra = KvConfig::FromString("known = 1\nstray = 2\n", "e.conf");
  extra.get_int("known", 0);
  try {
    extra.reject_unknown();
    FAIL("expected unknown-key error");
  } catch (const std::exception& e) {
    std::string msg = e.what();
    CHECK(msg.find("'stray'") != std::string::npos);
    CHECK(msg.find("e.conf:2") != std::string::npos);
  }
}

TEST_CASE("config-relative path resolution") {
  std::string dir = TmpDir("dkws_conf");
  std::string path = dir + "/a.conf";
  {
    std::ofstream os(path);
    os << "speech_manifest = rel/speech.tsv\n";
  }
  KvConfig kv = KvConfig::FromFile(path);
  CHECK(kv.resolve_path("rel/speech.tsv") == dir + "/rel/speech.tsv");
  CHECK(kv.resolve_path("/abs/speech.tsv") == "/abs/speech.tsv");
  CHECK(kv.resolve_path("") == "");
  CHECK_THROWS(KvConfig::FromFile(dir + "/absent.conf"));
}

TEST_CASE("run config round trips through its resolved text") {
  std::string dir = TmpDir("dkws_runconf");
  std::string conf = WriteToySetup(dir, "projection = ccl\nfeature_merge = true\n");
  RunConfig rc = RunConfig::FromFile(conf);
  CHECK(rc.model.sample_rate == 2000);
  CHECK(rc.model.encoder_channels == std::vector<int>{4, 8});
  CHECK(rc.model.projection == ProjectionMode::kContextLinear);
  CHECK(rc.model.feature_merge);
  CHECK(rc.train.iterations == 2);
  CHECK(rc.train.seed == 5);
  CHECK(rc.sim.rt60_hi == doctest::Approx(0.25));
  CHECK(!rc.speech_manifest.empty());

  // the resolved copy parses back to an identical resolved copy
  std::string resolved = dir + "/resolved.conf";
  rc.write_resolved(resolved);
  RunConfig rc2 = RunConfig::FromFile(resolved);
  CHECK(rc2.resolved_text() == rc.resolved_text());
  CHECK(rc2.model.hash() == rc.model.hash());

  // unknown keys in a run config are fatal
  std::string bad = dir + "/bad.conf";
  {
    std::ofstream os(bad);
    os << "sample_rate = 2000\nfft_size = 32\nwin_samples = 32\nhop_samples = 16\n"
       << "encoder_channels = 4,8\nmystery_knob = 9\n";
  }
  CHECK_THROWS(RunConfig::FromFile(bad));
}

TEST_CASE("cli exit codes") {
  CHECK(RunCli({"--help"}) == 0);
  CHECK(RunCli({"train", "--help"}) == 0);
  CHECK(RunCli({"no-such-command"}) == 2);
  CHECK(RunCli({}) == 2);                       // a subcommand is required
  CHECK(RunCli({"train"}) == 2);                // --config is required
  CHECK(RunCli({"train", "-c", "/nonexistent/x.conf"}) == 2);
  CHECK(RunCli({"plot", "--table", "/nonexistent/t.tsv"}) == 2);
  CHECK(RunCli({"stream", "-c", "/nonexistent/x.conf"}) == 2);  // missing required opts
}

TEST_CASE("cli end to end at toy scale") {
  std::string dir = TmpDir("dkws_e2e");
  std::string conf = WriteToySetup(dir, "projection = ccl\n");

  // simulate: mixture pairs plus a resolved config next to them
  std::string sim_dir = dir + "/sim";
  REQUIRE(RunCli({"simulate", "-c", conf, "-n", "2", "-o", sim_dir}) == 0);
  CHECK(fs::exists(sim_dir + "/resolved.conf"));
  CHECK(fs::exists(sim_dir + "/wav/mix0_noisy.wav"));
  CHECK(fs::exists(sim_dir + "/wav/mix1_target.wav"));
  std::string tsv = Slurp(sim_dir + "/mixtures.tsv");
  CHECK(tsv.find("id\tnoisy\ttarget") == 0);
  CHECK(tsv.find("mix1") != std::string::npos);

  // make-bias-list
  std::string bias_path = dir + "/bias.list";
  REQUIRE(RunCli({"make-bias-list", "-c", conf, "--mode", "fixed", "--size", "4", "-o",
                  bias_path}) == 0);
  CHECK(fs::exists(bias_path));

  // train two iterations with the bias list wired in via the config
  std::string conf2 = WriteToySetup(dir, std::string("projection = ccl\n") +
                                             "bias_list = " + bias_path + "\n");
  REQUIRE(RunCli({"train", "-c", conf2, "--log-every", "0"}) == 0);
  std::string final_ckpt = dir + "/out/checkpoints/final.ckpt";
  REQUIRE(fs::exists(final_ckpt));
  CHECK(fs::exists(dir + "/out/resolved.conf"));
  CHECK(fs::exists(dir + "/out/checkpoints/latest.ckpt"));

  // resuming a finished run is a no-op that still succeeds
  CHECK(RunCli({"train", "-c", conf2, "--resume", "--log-every", "0"}) == 0);

  // eval-roc
  std::string roc_dir = dir + "/roc";
  REQUIRE(RunCli({"eval-roc", "-c", conf2, "--checkpoint", final_ckpt, "--snr", "10", "-n",
                  "2", "-o", roc_dir}) == 0);
  std::string roc = Slurp(roc_dir + "/roc.tsv");
  CHECK(roc.find("threshold\tfalse_reject") == 0);
  CHECK(Slurp(roc_dir + "/summary.txt").find("auc = ") != std::string::npos);

  // eval-wake
  std::string wake_dir = dir + "/wake";
  REQUIRE(RunCli({"eval-wake", "-c", conf2, "--checkpoint", final_ckpt, "--snr", "10",
                  "-n", "2", "-o", wake_dir}) == 0);
  std::string wake = Slurp(wake_dir + "/wake.txt");
  CHECK(wake.find("accuracy = ") != std::string::npos);
  CHECK(wake.find("budget = ") != std::string::npos);

  // stream over one of the simulated mixtures
  CHECK(RunCli({"stream", "-c", conf2, "--checkpoint", final_ckpt, "--wav",
                sim_dir + "/wav/mix0_noisy.wav", "--threshold", "0.5"}) == 0);

  // export-energy + plot
  std::string table = dir + "/energy.tsv";
  REQUIRE(RunCli({"export-energy", "-c", conf2, "--checkpoint", final_ckpt, "--wav",
                  sim_dir + "/wav/mix0_noisy.wav", "-o", table}) == 0);
  CHECK(fs::exists(table));
  std::string plot = dir + "/plot.txt";
  REQUIRE(RunCli({"plot", "--table", table, "-o", plot, "--width", "40"}) == 0);
  std::string panels = Slurp(plot);
  CHECK(panels.find("merged") != std::string::npos);
  CHECK(panels.find('|') != std::string::npos);

  // bench-rtf on a very short span
  CHECK(RunCli({"bench-rtf", "-c", conf, "--seconds", "0.2", "--warmup", "0.05"}) == 0);

  // a checkpoint from a mismatched architecture is refused
  std::string text = Slurp(conf2);
  size_t at = text.find("kws_dim = 8");
  REQUIRE(at != std::string::npos);
  text.replace(at, 11, "kws_dim = 16");
  std::string conf3 = dir + "/run_wide.conf";
  {
    std::ofstream os(conf3);
    os << text;
  }
  CHECK(RunCli({"eval-roc", "-c", conf3, "--checkpoint", final_ckpt, "-o",
                dir + "/roc_bad"}) == 2);
}

TEST_CASE("cli mode overrides take effect in the resolved config") {
  std::string dir = TmpDir("dkws_override");
  std::string conf = WriteToySetup(dir);
  std::string sim_dir = dir + "/sim";
  REQUIRE(RunCli({"simulate", "-c", conf, "-n", "1", "-o", sim_dir, "--projection", "ccl",
                  "--feature-merge", "on", "--seed", "99"}) == 0);
  std::string resolved = Slurp(sim_dir + "/resolved.conf");
  CHECK(resolved.find("projection = ccl") != std::string::npos);
  CHECK(resolved.find("feature_merge = true") != std::string::npos);
  CHECK(resolved.find("seed = 99") != std::string::npos);

  // config lookup falls back to DKWS_CONFIG_DIR
  setenv("DKWS_CONFIG_DIR", dir.c_str(), 1);
  std::string name = fs::path(conf).filename().string();
  CHECK(RunCli({"simulate", "-c", name, "-n", "1", "-o", dir + "/sim2"}) == 0);
  unsetenv("DKWS_CONFIG_DIR");
}

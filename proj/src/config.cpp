// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dkws/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dkws {

namespace {
std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}
}  // namespace

KvConfig KvConfig::FromFile(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  KvConfig kv = FromString(ss.str(), path);
  kv.dir_ = std::filesystem::path(path).parent_path().string();
  return kv;
}

KvConfig KvConfig::FromString(const std::string& text, const std::string& origin) {
  KvConfig kv;
  kv.origin_ = origin;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = line;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value', got '" + trim(line) + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.entries_.count(key))
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                               key + "' (first at line " +
                               std::to_string(kv.entries_[key].line) + ")");
    kv.entries_[key] = Entry{value, lineno, false};
  }
  return kv;
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

KvConfig::Entry& KvConfig::require(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::logic_error("config: require() on absent key " + key);
  it->second.used = true;
  return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  return require(key).value;
}

int64_t KvConfig::get_int(const std::string& key, int64_t fallback) {
  if (!has(key)) return fallback;
  Entry& e = require(key);
  try {
    size_t pos = 0;
    int64_t v = std::stoll(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                             "' expects an integer, got '" + e.value + "'");
  }
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t fallback) {
  if (!has(key)) return fallback;
  Entry& e = require(key);
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                             "' expects an unsigned integer, got '" + e.value + "'");
  }
}

double KvConfig::get_double(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  Entry& e = require(key);
  try {
    size_t pos = 0;
    double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                             "' expects a number, got '" + e.value + "'");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  Entry& e = require(key);
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::runtime_error(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                           "' expects a boolean, got '" + e.value + "'");
}

std::vector<int> KvConfig::get_int_list(const std::string& key, std::vector<int> fallback) {
  if (!has(key)) return fallback;
  Entry& e = require(key);
  std::vector<int> out;
  std::istringstream is(e.value);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::runtime_error(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                               "' expects a comma-separated integer list, got '" + e.value + "'");
    }
  }
  if (out.empty())
    throw std::runtime_error(origin_ + ":" + std::to_string(e.line) + ": key '" + key +
                             "' has an empty list");
  return out;
}

void KvConfig::reject_unknown() const {
  std::string bad;
  for (const auto& [key, e] : entries_)
    if (!e.used)
      bad += (bad.empty() ? "" : "; ") + std::string("'") + key + "' at " + origin_ + ":" +
             std::to_string(e.line);
  if (!bad.empty()) throw std::runtime_error("config: unknown key(s): " + bad);
}

std::string KvConfig::resolve_path(const std::string& p) const {
  if (p.empty() || dir_.empty()) return p;
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return p;
  return (std::filesystem::path(dir_) / fp).string();
}

RunConfig RunConfig::FromFile(const std::string& path) {
  KvConfig kv = KvConfig::FromFile(path);
  RunConfig rc = FromKv(kv);
  kv.reject_unknown();
  return rc;
}

RunConfig RunConfig::FromKv(KvConfig& kv) {
  RunConfig rc;
  ModelConfig& m = rc.model;
  m.sample_rate = static_cast<int>(kv.get_int("sample_rate", m.sample_rate));
  m.spectro.fft_size = static_cast<int>(kv.get_int("fft_size", m.spectro.fft_size));
  m.spectro.win_ms = kv.get_double("win_ms", m.spectro.win_ms);
  m.spectro.hop_ms = kv.get_double("hop_ms", m.spectro.hop_ms);
  m.spectro.win_samples = static_cast<int>(kv.get_int("win_samples", m.spectro.win_samples));
  m.spectro.hop_samples = static_cast<int>(kv.get_int("hop_samples", m.spectro.hop_samples));
  m.spectro.window = kv.get_string("window", m.spectro.window);
  m.encoder_channels = kv.get_int_list("encoder_channels", m.encoder_channels);
  m.conv_kernel_f = static_cast<int>(kv.get_int("conv_kernel_f", m.conv_kernel_f));
  m.conv_kernel_t = static_cast<int>(kv.get_int("conv_kernel_t", m.conv_kernel_t));
  m.lstm_hidden = static_cast<int>(kv.get_int("lstm_hidden", m.lstm_hidden));
  m.lstm_layers = static_cast<int>(kv.get_int("lstm_layers", m.lstm_layers));
  m.lstm_proj = static_cast<int>(kv.get_int("lstm_proj", m.lstm_proj));
  m.kws_dim = static_cast<int>(kv.get_int("kws_dim", m.kws_dim));
  m.dtc_blocks = static_cast<int>(kv.get_int("dtc_blocks", m.dtc_blocks));
  m.dtc_kernel = static_cast<int>(kv.get_int("dtc_kernel", m.dtc_kernel));
  m.dilation_cycle = kv.get_int_list("dilation_cycle", m.dilation_cycle);
  m.context_frames = static_cast<int>(kv.get_int("context_frames", m.context_frames));
  m.bias_dim = static_cast<int>(kv.get_int("bias_dim", m.bias_dim));
  m.mel_bins = static_cast<int>(kv.get_int("mel_bins", m.mel_bins));
  m.bias_channels = static_cast<int>(kv.get_int("bias_channels", m.bias_channels));
  m.bias_blocks = static_cast<int>(kv.get_int("bias_blocks", m.bias_blocks));
  m.bias_att_dim = static_cast<int>(kv.get_int("bias_att_dim", m.bias_att_dim));
  m.projection = projection_from_string(kv.get_string("projection", to_string(m.projection)));
  m.bias_mode = bias_mode_from_string(kv.get_string("bias_mode", to_string(m.bias_mode)));
  m.feature_merge = kv.get_bool("feature_merge", m.feature_merge);
  m.kws_only = kv.get_bool("kws_only", m.kws_only);

  TrainConfig& t = rc.train;
  t.iterations = kv.get_int("iterations", t.iterations);
  t.batch_positive = static_cast<int>(kv.get_int("batch_positive", t.batch_positive));
  t.batch_negative = static_cast<int>(kv.get_int("batch_negative", t.batch_negative));
  t.noam.factor = kv.get_double("noam_factor", t.noam.factor);
  t.noam.warmup = kv.get_int("warmup", t.noam.warmup);
  t.noam.d_model = kv.get_int("d_model", t.noam.d_model);
  t.seed = kv.get_u64("seed", t.seed);
  t.checkpoint_every = kv.get_int("checkpoint_every", t.checkpoint_every);
  t.checkpoint_dir = kv.resolve_path(kv.get_string("checkpoint_dir", t.checkpoint_dir));
  t.bias_sample = static_cast<int>(kv.get_int("bias_sample", t.bias_sample));
  t.positive_window = static_cast<int>(kv.get_int("positive_window", t.positive_window));

  SimRanges& s = rc.sim;
  s.snr_lo = kv.get_double("snr_lo", s.snr_lo);
  s.snr_hi = kv.get_double("snr_hi", s.snr_hi);
  s.rt60_lo = kv.get_double("rt60_lo", s.rt60_lo);
  s.rt60_hi = kv.get_double("rt60_hi", s.rt60_hi);
  s.n_noise_lo = static_cast<int>(kv.get_int("n_noise_lo", s.n_noise_lo));
  s.n_noise_hi = static_cast<int>(kv.get_int("n_noise_hi", s.n_noise_hi));

  rc.speech_manifest = kv.resolve_path(kv.get_string("speech_manifest", ""));
  rc.noise_manifest = kv.resolve_path(kv.get_string("noise_manifest", ""));
  rc.test_speech_manifest = kv.resolve_path(kv.get_string("test_speech_manifest", ""));
  rc.test_noise_manifest = kv.resolve_path(kv.get_string("test_noise_manifest", ""));
  rc.bias_list_path = kv.resolve_path(kv.get_string("bias_list", ""));
  rc.out_dir = kv.resolve_path(kv.get_string("out_dir", rc.out_dir));
  rc.smooth_win = static_cast<int>(kv.get_int("smooth_win", rc.smooth_win));
  rc.refractory = static_cast<int>(kv.get_int("refractory", rc.refractory));
  rc.threshold = kv.get_double("threshold", rc.threshold);

  rc.model.validate();
  rc.train.validate();
  return rc;
}

std::string RunConfig::resolved_text() const {
  std::ostringstream os;
  os << "sample_rate = " << model.sample_rate << "\n";
  os << "fft_size = " << model.spectro.fft_size << "\n";
  os << "win_ms = " << model.spectro.win_ms << "\n";
  os << "hop_ms = " << model.spectro.hop_ms << "\n";
  os << "win_samples = " << model.spectro.win_samples << "\n";
  os << "hop_samples = " << model.spectro.hop_samples << "\n";
  os << "window = " << model.spectro.window << "\n";
  os << "encoder_channels = ";
  for (size_t i = 0; i < model.encoder_channels.size(); ++i)
    os << (i ? "," : "") << model.encoder_channels[i];
  os << "\n";
  os << "conv_kernel_f = " << model.conv_kernel_f << "\n";
  os << "conv_kernel_t = " << model.conv_kernel_t << "\n";
  os << "lstm_hidden = " << model.lstm_hidden << "\n";
  os << "lstm_layers = " << model.lstm_layers << "\n";
  os << "lstm_proj = " << model.lstm_proj << "\n";
  os << "kws_dim = " << model.kws_dim << "\n";
  os << "dtc_blocks = " << model.dtc_blocks << "\n";
  os << "dtc_kernel = " << model.dtc_kernel << "\n";
  os << "dilation_cycle = ";
  for (size_t i = 0; i < model.dilation_cycle.size(); ++i)
    os << (i ? "," : "") << model.dilation_cycle[i];
  os << "\n";
  os << "context_frames = " << model.context_frames << "\n";
  os << "bias_dim = " << model.bias_dim << "\n";
  os << "mel_bins = " << model.mel_bins << "\n";
  os << "bias_channels = " << model.bias_channels << "\n";
  os << "bias_blocks = " << model.bias_blocks << "\n";
  os << "bias_att_dim = " << model.bias_att_dim << "\n";
  os << "projection = " << to_string(model.projection) << "\n";
  os << "bias_mode = " << to_string(model.bias_mode) << "\n";
  os << "feature_merge = " << (model.feature_merge ? "true" : "false") << "\n";
  os << "kws_only = " << (model.kws_only ? "true" : "false") << "\n";
  os << "iterations = " << train.iterations << "\n";
  os << "batch_positive = " << train.batch_positive << "\n";
  os << "batch_negative = " << train.batch_negative << "\n";
  os << "noam_factor = " << train.noam.factor << "\n";
  os << "warmup = " << train.noam.warmup << "\n";
  os << "d_model = " << train.noam.d_model << "\n";
  os << "seed = " << train.seed << "\n";
  os << "checkpoint_every = " << train.checkpoint_every << "\n";
  os << "checkpoint_dir = " << train.checkpoint_dir << "\n";
  os << "bias_sample = " << train.bias_sample << "\n";
  os << "positive_window = " << train.positive_window << "\n";
  os << "snr_lo = " << sim.snr_lo << "\n";
  os << "snr_hi = " << sim.snr_hi << "\n";
  os << "rt60_lo = " << sim.rt60_lo << "\n";
  os << "rt60_hi = " << sim.rt60_hi << "\n";
  os << "n_noise_lo = " << sim.n_noise_lo << "\n";
  os << "n_noise_hi = " << sim.n_noise_hi << "\n";
  os << "speech_manifest = " << speech_manifest << "\n";
  os << "noise_manifest = " << noise_manifest << "\n";
  os << "test_speech_manifest = " << test_speech_manifest << "\n";
  os << "test_noise_manifest = " << test_noise_manifest << "\n";
  os << "bias_list = " << bias_list_path << "\n";
  os << "out_dir = " << out_dir << "\n";
  os << "smooth_win = " << smooth_win << "\n";
  os << "refractory = " << refractory << "\n";
  os << "threshold = " << threshold << "\n";
  return os.str();
}

void RunConfig::write_resolved(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("config: cannot write resolved copy to " + path);
  os << resolved_text();
  if (!os) throw std::runtime_error("config: write failed for " + path);
}

}  // namespace dkws

// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_CONFIG_HPP_
#define DKWS_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

#include "dkws/model.hpp"
#include "dkws/simulate.hpp"
#include "dkws/train.hpp"

namespace dkws {

// Flat `key = value` file: one pair per line, '#' comments, no sections, no
// includes. Every key must be consumed by a typed getter; leftovers are
// reported with their line numbers.
class KvConfig {
 public:
  static KvConfig FromFile(const std::string& path);
  static KvConfig FromString(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback);
  int64_t get_int(const std::string& key, int64_t fallback);
  double get_double(const std::string& key, double fallback);
  bool get_bool(const std::string& key, bool fallback);  // true/false/1/0/on/off
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback);
  uint64_t get_u64(const std::string& key, uint64_t fallback);

  // Throws naming every unconsumed key and its line number.
  void reject_unknown() const;

  const std::string& origin() const { return origin_; }
  const std::string& dir() const { return dir_; }  // for config-relative paths
  std::string resolve_path(const std::string& p) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
  };
  std::map<std::string, Entry> entries_;
  std::string origin_, dir_;
  Entry& require(const std::string& key);
};

// Everything one run needs; the union of model, training, simulation, and
// decision settings plus manifest locations.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SimRanges sim;
  std::string speech_manifest, noise_manifest;
  std::string test_speech_manifest, test_noise_manifest;
  std::string bias_list_path;
  std::string out_dir = ".";
  int smooth_win = 30;
  int refractory = 100;
  double threshold = 0.5;

  static RunConfig FromFile(const std::string& path);
  static RunConfig FromKv(KvConfig& kv);
  // Canonical text of every effective setting; written next to run outputs.
  std::string resolved_text() const;
  void write_resolved(const std::string& path) const;
};

}  // namespace dkws

#endif  // DKWS_CONFIG_HPP_

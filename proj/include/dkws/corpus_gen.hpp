// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_CORPUS_GEN_HPP_
#define DKWS_CORPUS_GEN_HPP_

#include <string>
#include <vector>

#include "dkws/simulate.hpp"

namespace dkws {

// Synthetic desk-scale corpus: the "keyword" is a speaker-colored two-tone
// motif with per-utterance jitter; negatives carry non-matching tonal content;
// noise files are colored-noise beds. Everything is deterministic in the seed
// and every keyword's end time is known exactly.
struct CorpusSpec {
  std::string out_dir;
  std::string prefix = "train";  // id prefix, also the manifest file stem
  int sample_rate = 2000;
  int n_keywords = 20;
  int n_negatives = 20;
  int n_noise = 4;
  int n_speakers = 4;
  int speaker_offset = 0;  // first speaker index, to keep splits disjoint
  uint64_t seed = 0;
};

struct CorpusPaths {
  std::string speech_manifest;
  std::string noise_manifest;
};

CorpusPaths GenerateSyntheticCorpus(const CorpusSpec& spec);

// One clean keyword utterance (used by tests needing a known clip).
AudioBuffer SynthKeywordClip(int sample_rate, int speaker, uint64_t seed,
                             double* keyword_end_s);

}  // namespace dkws

#endif  // DKWS_CORPUS_GEN_HPP_

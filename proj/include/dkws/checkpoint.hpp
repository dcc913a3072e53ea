// Copyright 2026 DKWS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DKWS_CHECKPOINT_HPP_
#define DKWS_CHECKPOINT_HPP_

#include <string>

#include "dkws/losses.hpp"
#include "dkws/model.hpp"

namespace dkws {

struct CheckpointMeta {
  uint64_t config_hash = 0;
  int64_t iteration = 0;
  int64_t adam_steps = 0;
  int sample_rate = 0;
};

// Text header (magic, config hash, iteration, tensor table) followed by a raw
// little-endian float64 payload. Round-trips bit-exactly. Saves every trainable
// tensor, its Adam moments, normalization running statistics, and the cached
// bias embedding when present.
void SaveCheckpoint(const std::string& path, KwsModel& model, int64_t iteration,
                    const AdamOptimizer* opt = nullptr);

// Restores in place; throws when the file's config hash or any tensor shape
// disagrees with the model.
CheckpointMeta LoadCheckpoint(const std::string& path, KwsModel& model,
                              AdamOptimizer* opt = nullptr);

// Header only, no tensor restore.
CheckpointMeta PeekCheckpoint(const std::string& path);

}  // namespace dkws

#endif  // DKWS_CHECKPOINT_HPP_

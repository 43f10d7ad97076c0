#pragma once

// Binary checkpoint: a magic line, one JSON header line, then every
// parameter as (name, shape, row-major little-endian f64 payload).

#include <filesystem>
#include <memory>

#include "t2t/model.hpp"
#include "t2t/treecodec.hpp"

namespace t2t {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::unique_ptr<Model> model;
  VocabPair vocab;
};

void save_checkpoint(const std::filesystem::path& path, const Model& model, const VocabPair& vocab);

// Throws CheckpointError on a bad magic line, unknown version, vocabulary
// hash mismatch, or any tensor whose name or shape differs from what the
// recorded configuration implies.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace t2t

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "maskfix/model.hpp"
#include "maskfix/training.hpp"

namespace maskfix {

// On-disk model snapshot. Layout:
//   MFX1 <key=value ...>\n          header: config fields, step, seed
//   <name> <rank> <dims...>\n        one line per tensor, sorted by name
//   <raw little-endian float32 data> row-major, rows*cols values
// Optimizer moments ride along as tensors named opt.m.* / opt.v.* when the
// snapshot is meant for resuming. Round-trips are bit-exact.
struct Checkpoint {
  ModelConfig config;
  long long step = 0;
  std::uint64_t seed = 0;
  Parameters params;
  std::optional<AdamState> opt;
};

void save_checkpoint(const std::string& path, const Parameters& params,
                     long long step, std::uint64_t seed,
                     const AdamState* opt = nullptr);

// Throws ParseError (with a byte offset) on malformed files and
// CheckpointError when the tensor inventory does not match the header's
// configuration.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace maskfix

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maskfix/training.hpp"

namespace maskfix {

// Everything a training run needs beyond the optimizer schedule: model
// shape, dataset selection, and output plumbing. Parsed from a plain-text
// file of `key = value` lines ('#' starts a comment), with optional
// `key=value` overrides applied afterwards, last writer wins.
struct TrainRunConfig {
  TrainConfig train;

  int layers = 2;
  int hidden_dim = 64;
  int heads = 4;
  int num_classes = 2;

  std::string dataset = "stripes";  // "stripes" or "ppm"
  std::string data_dir;             // ppm: folder with index.csv
  int bins = 16;                    // ppm: quantizer bins per channel
  int stripe_height = 8;            // stripes: grid shape and codebook
  int stripe_width = 8;
  int stripe_vocab = 16;
  int stripe_phases = 16;  // phases 0..P-1 per stripe class

  std::string out_dir = "runs/default";
  long long checkpoint_every = 0;  // 0 = final checkpoint only
  long long log_every = 1;

  void validate() const;
};

// Parses a config file. Unknown keys and unparseable values raise
// ConfigError naming the key and the line.
TrainRunConfig parse_train_config_file(const std::string& path);

// Same grammar from an in-memory string (one line per entry).
TrainRunConfig parse_train_config_text(const std::string& text);

// Applies a single `key=value` override.
void apply_config_entry(TrainRunConfig& config, const std::string& key,
                        const std::string& value);

// The fully resolved key order used by manifests and round-trip dumps.
std::vector<std::pair<std::string, std::string>> dump_config(
    const TrainRunConfig& config);

}  // namespace maskfix

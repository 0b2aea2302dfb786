#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maskfix/config.hpp"
#include "maskfix/token_grid.hpp"

namespace maskfix {

// Labeled token grids ready for the trainer, all sharing one shape and one
// codebook.
struct Dataset {
  std::vector<std::pair<TokenGrid, int>> examples;
  int height = 0;
  int width = 0;
  int vocab = 0;
  int num_classes = 0;
};

// Flat folder of P6 PPM files plus an index.csv with a `file,label` header.
// Every image is quantized with `bins` per channel; all images must share
// one size. Missing folder, missing index, unreadable or malformed images,
// and inconsistent sizes all raise DatasetError.
Dataset load_ppm_dataset(const std::string& dir, int bins);

// Cyclic stripe grids, both classes, phases 0..phases-1 each.
Dataset make_stripes_dataset(int height, int width, int vocab, int phases);

// Dispatches on config.dataset and grows num_classes to cover the labels
// actually present.
Dataset load_dataset(const TrainRunConfig& config);

}  // namespace maskfix

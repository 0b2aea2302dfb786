#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "maskfix/pixel_codec.hpp"
#include "maskfix/token_grid.hpp"

namespace maskfix {

// Structured token grids with strong local consistency: every row (or
// column) holds one value and adjacent stripes step through the codebook
// cyclically, so any single cell is recoverable from its neighbours. Class 0
// varies along x (vertical stripes), class 1 along y (horizontal stripes).
TokenGrid striped_grid(int height, int width, int vocab, int phase,
                       int class_label);

// The requested phases of both stripe classes, as (grid, label) pairs.
std::vector<std::pair<TokenGrid, int>> striped_dataset(
    int height, int width, int vocab,
    const std::vector<int>& phases_class0,
    const std::vector<int>& phases_class1);

// Smooth two-ramp RGB test image for codec round-trips.
RgbImage gradient_image(int height, int width, std::uint64_t seed);

}  // namespace maskfix

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "maskfix/token_grid.hpp"

namespace maskfix {

struct CorruptionSpec {
  double alpha = 0.0;
  std::uint64_t seed = 0;
};

// Which positions were overwritten and what stood there before. A position
// counts as replaced even when the drawn value happens to equal the original,
// because the draw is unconditioned.
struct CorruptionRecord {
  std::vector<int> replaced;
  std::vector<Token> originals;
};

// Independently replaces each context position's token with probability
// alpha. Replacement values are drawn uniformly from the multiset of this
// grid's own unmasked tokens, i.e. the empirical token distribution of the
// image itself. Masked cells and unmasked cells outside the context list are
// never touched. This is a training-time operator only; the sampler never
// calls it.
std::pair<TokenGrid, CorruptionRecord> inject_random_tokens(
    const TokenGrid& clean_grid, const std::vector<int>& context_positions,
    const CorruptionSpec& spec);

}  // namespace maskfix

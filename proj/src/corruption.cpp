#include "maskfix/corruption.hpp"

#include <stdexcept>
#include <string>

#include "maskfix/rng.hpp"

namespace maskfix {

std::pair<TokenGrid, CorruptionRecord> inject_random_tokens(
    const TokenGrid& clean_grid, const std::vector<int>& context_positions,
    const CorruptionSpec& spec) {
  if (spec.alpha < 0.0 || spec.alpha > 1.0) {
    throw std::invalid_argument("alpha outside [0, 1]");
  }
  std::vector<Token> pool;
  pool.reserve(static_cast<std::size_t>(clean_grid.size()));
  for (int i = 0; i < clean_grid.size(); ++i) {
    if (!clean_grid.is_masked(i)) pool.push_back(clean_grid.cell(i));
  }

  CorruptionRecord record;
  std::vector<Token> cells = clean_grid.cells();
  Rng rng = derive_rng(spec.seed, stream::kCorruption);
  for (int pos : context_positions) {
    if (pos < 0 || pos >= clean_grid.size()) {
      throw std::invalid_argument("context position " + std::to_string(pos) +
                                  " out of range");
    }
    if (clean_grid.is_masked(pos)) {
      throw std::invalid_argument("context position " + std::to_string(pos) +
                                  " is masked");
    }
    // One coin per position, and only replaced positions consume a value
    // draw. Keeping the draw pattern minimal makes the stream easy to reason
    // about in the determinism tests.
    if (rng.uniform() < spec.alpha) {
      Token value = pool[static_cast<std::size_t>(
          rng.below(static_cast<std::uint64_t>(pool.size())))];
      record.replaced.push_back(pos);
      record.originals.push_back(cells[static_cast<std::size_t>(pos)]);
      cells[static_cast<std::size_t>(pos)] = value;
    }
  }
  return {TokenGrid(clean_grid.height(), clean_grid.width(), clean_grid.vocab(),
                    std::move(cells)),
          record};
}

}  // namespace maskfix

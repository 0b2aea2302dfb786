#include "maskfix/token_grid.hpp"

#include <stdexcept>
#include <string>
#include <unordered_set>

namespace maskfix {

Vocabulary::Vocabulary(int size) : size_(size) {
  if (size < 2) {
    throw std::invalid_argument("vocabulary size must be at least 2, got " +
                                std::to_string(size));
  }
}

TokenGrid::TokenGrid(int height, int width, Vocabulary vocab,
                     std::vector<Token> cells)
    : height_(height), width_(width), vocab_(vocab), cells_(std::move(cells)) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  if (cells_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("cell count does not match grid dimensions");
  }
  for (Token t : cells_) {
    if (t < 0 || t > vocab_.mask_id()) {
      throw std::invalid_argument("cell value " + std::to_string(t) +
                                  " outside [0, mask_id]");
    }
  }
}

int TokenGrid::masked_count() const {
  int count = 0;
  for (Token t : cells_) {
    if (t == vocab_.mask_id()) ++count;
  }
  return count;
}

TokenGrid new_fully_masked(int height, int width, Vocabulary vocab) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  std::vector<Token> cells(static_cast<std::size_t>(height) * width,
                           vocab.mask_id());
  return TokenGrid(height, width, vocab, std::move(cells));
}

TokenGrid apply_tokens(const TokenGrid& grid, const std::vector<int>& positions,
                       const std::vector<Token>& values) {
  if (positions.size() != values.size()) {
    throw std::invalid_argument("positions and values differ in length");
  }
  std::unordered_set<int> seen;
  std::vector<Token> cells = grid.cells();
  for (std::size_t k = 0; k < positions.size(); ++k) {
    int pos = positions[k];
    if (pos < 0 || pos >= grid.size()) {
      throw std::invalid_argument("position " + std::to_string(pos) +
                                  " out of range");
    }
    if (!seen.insert(pos).second) {
      throw std::invalid_argument("duplicate position " + std::to_string(pos));
    }
    if (!grid.vocab().valid_token(values[k])) {
      throw std::invalid_argument("value " + std::to_string(values[k]) +
                                  " outside codebook");
    }
    cells[static_cast<std::size_t>(pos)] = values[k];
  }
  return TokenGrid(grid.height(), grid.width(), grid.vocab(), std::move(cells));
}

std::vector<int> context_positions(const TokenGrid& grid) {
  std::vector<int> out;
  for (int i = 0; i < grid.size(); ++i) {
    if (!grid.is_masked(i)) out.push_back(i);
  }
  return out;
}

MaskState mask_state(const TokenGrid& grid) {
  MaskState state;
  state.masked.resize(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) {
    bool m = grid.is_masked(i);
    state.masked[static_cast<std::size_t>(i)] = m;
    if (!m) state.context.push_back(i);
  }
  return state;
}

}  // namespace maskfix

#pragma once

#include <cstdint>
#include <vector>

namespace maskfix {

using Token = std::int32_t;

// Codebook of V valid token values 0..V-1. The mask sentinel is V itself,
// one past the codebook, so an embedding table of V+1 rows needs no special
// casing for masked cells.
class Vocabulary {
 public:
  explicit Vocabulary(int size);
  int size() const noexcept { return size_; }
  Token mask_id() const noexcept { return size_; }
  bool valid_token(Token t) const noexcept { return t >= 0 && t < size_; }
  bool operator==(const Vocabulary& other) const noexcept = default;

 private:
  int size_;
};

// An h x w grid of tokens, some of which may still be the mask sentinel.
// Immutable after construction; "mutations" build a new grid.
class TokenGrid {
 public:
  TokenGrid(int height, int width, Vocabulary vocab, std::vector<Token> cells);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int size() const noexcept { return height_ * width_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  const std::vector<Token>& cells() const noexcept { return cells_; }

  Token cell(int i) const { return cells_[static_cast<std::size_t>(i)]; }
  bool is_masked(int i) const { return cell(i) == vocab_.mask_id(); }
  int masked_count() const;

 private:
  int height_;
  int width_;
  Vocabulary vocab_;
  std::vector<Token> cells_;
};

// Boolean mask view plus the derived list of unmasked positions, for callers
// that want both without rescanning.
struct MaskState {
  std::vector<bool> masked;
  std::vector<int> context;
};

// Flat row-major position shared by every module: i = y * w + x.
inline int flat_index(int y, int x, int width) { return y * width + x; }

TokenGrid new_fully_masked(int height, int width, Vocabulary vocab);

// Writes values[k] at positions[k] and clears the mask there. Positions must
// be distinct and in range, values must be valid codebook tokens. Positions
// that are already unmasked are overwritten (the correction pass relies on
// this).
TokenGrid apply_tokens(const TokenGrid& grid, const std::vector<int>& positions,
                       const std::vector<Token>& values);

// Unmasked positions in ascending order.
std::vector<int> context_positions(const TokenGrid& grid);

MaskState mask_state(const TokenGrid& grid);

inline bool is_complete(const TokenGrid& grid) { return grid.masked_count() == 0; }

}  // namespace maskfix

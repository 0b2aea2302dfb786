#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "maskfix/token_grid.hpp"

namespace maskfix {

// Explicit joint distribution over every complete h x w grid with vocabulary
// V, stored as a table of V^n probabilities. Grid index is mixed-radix with
// position 0 as the least significant digit. Enumeration is capped at 2^20
// outcomes, which is plenty for ground-truth checks and nothing else.
class MicroDistribution {
 public:
  MicroDistribution(int height, int width, int vocab, std::vector<double> table);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int vocab() const noexcept { return vocab_; }
  int size() const noexcept { return height_ * width_; }
  std::uint64_t outcomes() const noexcept { return table_.size(); }
  const std::vector<double>& table() const noexcept { return table_; }

  std::uint64_t index_of(const std::vector<Token>& cells) const;
  std::vector<Token> cells_of(std::uint64_t index) const;
  double probability(std::uint64_t index) const { return table_[index]; }
  double probability(const std::vector<Token>& cells) const {
    return table_[index_of(cells)];
  }

 private:
  int height_;
  int width_;
  int vocab_;
  std::vector<double> table_;
};

// Exact per-position log conditionals given the grid's unmasked cells,
// computed by summing the joint table. Row i for a masked cell conditions on
// all unmasked cells; row i for an unmasked cell conditions on all OTHER
// unmasked cells (leave-one-out), which is the score the correction pass
// needs. Throws DegenerateContextError when the observed cells have zero
// marginal mass. Zero-probability outcomes are clamped before the log so
// every entry stays finite.
Eigen::MatrixXd oracle_conditionals(const MicroDistribution& micro,
                                    const TokenGrid& grid);

MicroDistribution uniform_micro(int height, int width, int vocab);

// 1x2 grid, V = 2, probability 1/2 on (0,0) and 1/2 on (1,1). The two cells
// are perfectly coupled while each marginal is uniform, so any
// independent-parallel sampler gets the pair wrong half the time.
MicroDistribution xor_pair_micro();

// Seeded joint with every outcome's mass bounded away from zero, for chain
// rule and sampling tests that need strictly positive conditionals.
MicroDistribution random_micro(int height, int width, int vocab,
                               std::uint64_t seed);

}  // namespace maskfix

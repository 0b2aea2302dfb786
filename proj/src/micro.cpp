#include "maskfix/micro.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "maskfix/errors.hpp"
#include "maskfix/rng.hpp"

namespace maskfix {

namespace {

std::uint64_t checked_outcome_count(int n, int vocab) {
  std::uint64_t count = 1;
  for (int i = 0; i < n; ++i) {
    count *= static_cast<std::uint64_t>(vocab);
    if (count > (1ULL << 20)) {
      throw std::invalid_argument("micro-distribution too large to enumerate");
    }
  }
  return count;
}

}  // namespace

MicroDistribution::MicroDistribution(int height, int width, int vocab,
                                     std::vector<double> table)
    : height_(height), width_(width), vocab_(vocab), table_(std::move(table)) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("grid dimensions must be positive");
  }
  if (vocab < 2) throw std::invalid_argument("vocabulary size must be >= 2");
  std::uint64_t count = checked_outcome_count(height * width, vocab);
  if (table_.size() != count) {
    throw std::invalid_argument("table size must be vocab^(h*w)");
  }
  double sum = 0.0;
  for (double p : table_) {
    if (!(p >= 0.0)) throw std::invalid_argument("negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("probabilities sum to " + std::to_string(sum));
  }
}

std::uint64_t MicroDistribution::index_of(const std::vector<Token>& cells) const {
  if (cells.size() != static_cast<std::size_t>(size())) {
    throw std::invalid_argument("cell count mismatch");
  }
  std::uint64_t index = 0;
  for (int i = size() - 1; i >= 0; --i) {
    Token t = cells[static_cast<std::size_t>(i)];
    if (t < 0 || t >= vocab_) {
      throw std::invalid_argument("cell value outside vocabulary");
    }
    index = index * static_cast<std::uint64_t>(vocab_) +
            static_cast<std::uint64_t>(t);
  }
  return index;
}

std::vector<Token> MicroDistribution::cells_of(std::uint64_t index) const {
  if (index >= table_.size()) throw std::invalid_argument("index out of range");
  std::vector<Token> cells(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) {
    cells[static_cast<std::size_t>(i)] =
        static_cast<Token>(index % static_cast<std::uint64_t>(vocab_));
    index /= static_cast<std::uint64_t>(vocab_);
  }
  return cells;
}

Eigen::MatrixXd oracle_conditionals(const MicroDistribution& micro,
                                    const TokenGrid& grid) {
  if (grid.height() != micro.height() || grid.width() != micro.width() ||
      grid.vocab().size() != micro.vocab()) {
    throw std::invalid_argument("grid does not match micro-distribution");
  }
  int n = micro.size();
  int vocab = micro.vocab();

  std::vector<int> observed;
  for (int i = 0; i < n; ++i) {
    if (!grid.is_masked(i)) observed.push_back(i);
  }

  // One sweep over all outcomes. An outcome matching every observed cell
  // contributes to every row; an outcome mismatching exactly one observed
  // cell contributes only to that cell's leave-one-out row. Anything else
  // contributes nowhere.
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, vocab);
  std::vector<Token> cells(static_cast<std::size_t>(n), 0);
  std::uint64_t count = micro.outcomes();
  for (std::uint64_t g = 0; g < count; ++g) {
    double p = micro.probability(g);
    if (p > 0.0) {
      int mismatches = 0;
      int mismatch_pos = -1;
      for (int o : observed) {
        if (cells[static_cast<std::size_t>(o)] != grid.cell(o)) {
          if (++mismatches > 1) break;
          mismatch_pos = o;
        }
      }
      if (mismatches == 0) {
        for (int i = 0; i < n; ++i) {
          mass(i, cells[static_cast<std::size_t>(i)]) += p;
        }
      } else if (mismatches == 1) {
        mass(mismatch_pos, cells[static_cast<std::size_t>(mismatch_pos)]) += p;
      }
    }
    // Mixed-radix odometer; cheaper than re-decoding each index.
    for (int i = 0; i < n; ++i) {
      if (++cells[static_cast<std::size_t>(i)] < vocab) break;
      cells[static_cast<std::size_t>(i)] = 0;
    }
  }

  Eigen::MatrixXd logits(n, vocab);
  for (int i = 0; i < n; ++i) {
    double denom = mass.row(i).sum();
    if (denom <= 0.0) {
      throw DegenerateContextError(
          "observed cells have zero marginal probability (row " +
          std::to_string(i) + ")");
    }
    for (int c = 0; c < vocab; ++c) {
      double p = mass(i, c) / denom;
      logits(i, c) = std::log(std::max(p, 1e-300));
    }
  }
  return logits;
}

MicroDistribution uniform_micro(int height, int width, int vocab) {
  std::uint64_t count = checked_outcome_count(height * width, vocab);
  std::vector<double> table(static_cast<std::size_t>(count),
                            1.0 / static_cast<double>(count));
  return MicroDistribution(height, width, vocab, std::move(table));
}

MicroDistribution xor_pair_micro() {
  std::vector<double> table(4, 0.0);
  table[0] = 0.5;  // (0, 0)
  table[3] = 0.5;  // (1, 1)
  return MicroDistribution(1, 2, 2, std::move(table));
}

MicroDistribution random_micro(int height, int width, int vocab,
                               std::uint64_t seed) {
  std::uint64_t count = checked_outcome_count(height * width, vocab);
  Rng rng = derive_rng(seed, stream::kInit, height * 131 + width, vocab);
  std::vector<double> table(static_cast<std::size_t>(count));
  double sum = 0.0;
  for (double& p : table) {
    p = 0.1 + rng.uniform();
    sum += p;
  }
  for (double& p : table) p /= sum;
  // Normalization above leaves a rounding residue; push it onto the last
  // outcome so the constructor's sum check is exact to float precision.
  double residue = 1.0;
  for (std::size_t i = 0; i + 1 < table.size(); ++i) residue -= table[i];
  table.back() = residue;
  return MicroDistribution(height, width, vocab, std::move(table));
}

}  // namespace maskfix

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "maskfix/micro.hpp"
#include "maskfix/predictor.hpp"
#include "maskfix/rng.hpp"
#include "maskfix/sampling.hpp"
#include "maskfix/token_grid.hpp"

namespace maskfix {

// Hit fractions for a single masked-reconstruction forward. An accuracy is
// absent (not zero) when its category holds no positions.
struct AccuracyReport {
  std::optional<double> acc_next;
  std::optional<double> acc_full_context;
  std::optional<double> acc_corrupted_tokens;
  int next_total = 0;
  int context_total = 0;
  int corrupted_total = 0;
  int next_hits = 0;
  int context_hits = 0;
  int corrupted_hits = 0;
};

// Empirical draws against an enumerable ground truth.
struct DistributionReport {
  double tv = 0.0;  // total-variation distance, in [0, 1]
  std::vector<double> empirical;  // indexed like micro.table()
  std::vector<double> exact;
  long long draws = 0;
};

// True when true_token ranks inside the top ceil(fraction * V) tokens by
// probability. Equal scores rank lower token ids first, so the hit set has
// exactly that size.
bool top_k_hit(const Eigen::VectorXd& logits_row, Token true_token,
               double fraction);

// Masked-reconstruction probe: the first ceil(context_fraction * n) cells of
// the Halton order stay visible (corrupted at rate alpha), the rest are
// masked, and one forward is scored against the clean tokens per category:
// masked cells ("next"), visible cells, and the corrupted subset. Hits are
// top-k at `fraction`.
AccuracyReport one_step_reconstruction(const Predictor& predictor,
                                       const TokenGrid& clean_grid, int label,
                                       double context_fraction, double alpha,
                                       double fraction, Rng& rng);

// Runs the sampler `draws` times with per-draw seeds derived from
// config.seed and compares outcome frequencies with the exact joint.
DistributionReport empirical_vs_exact(const Predictor& predictor,
                                      const MicroDistribution& micro,
                                      const SampleConfig& config,
                                      long long draws);

// Fraction of grids on which the predicate is false.
double violation_rate(const std::vector<TokenGrid>& samples,
                      const std::function<bool(const TokenGrid&)>& constraint);

}  // namespace maskfix

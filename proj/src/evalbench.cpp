#include "maskfix/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "maskfix/corruption.hpp"
#include "maskfix/sequencing.hpp"

namespace maskfix {

bool top_k_hit(const Eigen::VectorXd& logits_row, Token true_token,
               double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("fraction must lie in (0, 1]");
  }
  const Eigen::Index v = logits_row.size();
  if (true_token < 0 || true_token >= v) {
    throw std::invalid_argument("true_token outside the codebook");
  }
  const auto k = static_cast<Eigen::Index>(
      std::ceil(fraction * static_cast<double>(v)));
  // Rank = number of tokens strictly ahead of true_token; equal scores rank
  // by lower id.
  Eigen::Index ahead = 0;
  const double own = logits_row(true_token);
  for (Eigen::Index c = 0; c < v; ++c) {
    if (logits_row(c) > own || (logits_row(c) == own && c < true_token)) {
      ++ahead;
    }
  }
  return ahead < k;
}

AccuracyReport one_step_reconstruction(const Predictor& predictor,
                                       const TokenGrid& clean_grid, int label,
                                       double context_fraction, double alpha,
                                       double fraction, Rng& rng) {
  if (!(context_fraction > 0.0) || context_fraction > 1.0) {
    throw std::invalid_argument("context_fraction must lie in (0, 1]");
  }
  if (clean_grid.masked_count() != 0) {
    throw std::invalid_argument("probe needs a complete clean grid");
  }
  const int n = clean_grid.size();
  const int keep = static_cast<int>(
      std::ceil(context_fraction * static_cast<double>(n)));

  OrderPlan plan = halton_order(clean_grid.height(), clean_grid.width());
  std::vector<int> context(plan.order.begin(), plan.order.begin() + keep);

  CorruptionSpec spec{alpha, rng.raw()};
  auto [corrupted, record] = inject_random_tokens(clean_grid, context, spec);

  // Mask everything outside the context, then run the single forward.
  std::vector<bool> visible(static_cast<std::size_t>(n), false);
  for (int p : context) visible[static_cast<std::size_t>(p)] = true;
  std::vector<Token> cells;
  cells.reserve(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    cells.push_back(visible[static_cast<std::size_t>(p)]
                        ? corrupted.cell(p)
                        : clean_grid.vocab().mask_id());
  }
  TokenGrid input(clean_grid.height(), clean_grid.width(), clean_grid.vocab(),
                  std::move(cells));
  Logits logits = predictor.logits(input, label);
  if (logits.rows() != n) {
    throw std::invalid_argument("predictor must score every position");
  }

  std::vector<bool> was_corrupted(static_cast<std::size_t>(n), false);
  for (int p : record.replaced) was_corrupted[static_cast<std::size_t>(p)] = true;

  AccuracyReport report;
  for (int p = 0; p < n; ++p) {
    bool hit = top_k_hit(logits.row(p).transpose(), clean_grid.cell(p),
                         fraction);
    if (visible[static_cast<std::size_t>(p)]) {
      ++report.context_total;
      report.context_hits += hit ? 1 : 0;
      if (was_corrupted[static_cast<std::size_t>(p)]) {
        ++report.corrupted_total;
        report.corrupted_hits += hit ? 1 : 0;
      }
    } else {
      ++report.next_total;
      report.next_hits += hit ? 1 : 0;
    }
  }
  if (report.next_total > 0) {
    report.acc_next = report.next_hits / static_cast<double>(report.next_total);
  }
  if (report.context_total > 0) {
    report.acc_full_context =
        report.context_hits / static_cast<double>(report.context_total);
  }
  if (report.corrupted_total > 0) {
    report.acc_corrupted_tokens =
        report.corrupted_hits / static_cast<double>(report.corrupted_total);
  }
  return report;
}

DistributionReport empirical_vs_exact(const Predictor& predictor,
                                      const MicroDistribution& micro,
                                      const SampleConfig& config,
                                      long long draws) {
  if (draws < 1) throw std::invalid_argument("draws must be >= 1");

  DistributionReport report;
  report.draws = draws;
  report.exact = micro.table();
  report.empirical.assign(micro.table().size(), 0.0);

  Vocabulary vocab(micro.vocab());
  Rng seeder = derive_rng(config.seed, stream::kDraw);
  SampleConfig draw_config = config;
  std::vector<Token> cells(static_cast<std::size_t>(micro.size()));
  for (long long i = 0; i < draws; ++i) {
    draw_config.seed = seeder.raw();
    auto [grid, trace] = sample(predictor, vocab, micro.height(),
                                micro.width(), 0, draw_config);
    (void)trace;
    for (int p = 0; p < grid.size(); ++p) {
      cells[static_cast<std::size_t>(p)] = grid.cell(p);
    }
    report.empirical[micro.index_of(cells)] += 1.0;
  }
  double inv = 1.0 / static_cast<double>(draws);
  double tv = 0.0;
  for (std::size_t g = 0; g < report.empirical.size(); ++g) {
    report.empirical[g] *= inv;
    tv += std::abs(report.empirical[g] - report.exact[g]);
  }
  report.tv = 0.5 * tv;
  return report;
}

double violation_rate(const std::vector<TokenGrid>& samples,
                      const std::function<bool(const TokenGrid&)>& constraint) {
  if (samples.empty()) throw std::invalid_argument("no samples to score");
  long long violations = 0;
  for (const TokenGrid& grid : samples) {
    if (!constraint(grid)) ++violations;
  }
  return violations / static_cast<double>(samples.size());
}

}  // namespace maskfix

#include "maskfix/sampling.hpp"

#include <algorithm>
#include <stdexcept>

namespace maskfix {

namespace {

// Categorical draw from softmax(logits / temperature) by inverse CDF.
Token draw_token(const Eigen::VectorXd& row, double temperature, Rng& rng) {
  Eigen::VectorXd probs = softmax_vector(row / temperature);
  double u = rng.uniform();
  double cdf = 0.0;
  for (Eigen::Index c = 0; c < probs.size(); ++c) {
    cdf += probs(c);
    if (u < cdf) return static_cast<Token>(c);
  }
  return static_cast<Token>(probs.size() - 1);  // numerical residue
}

}  // namespace

void SampleConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be > 0");
  }
  if (!(cfg_weight >= 0.0)) {
    throw std::invalid_argument("cfg_weight must be >= 0");
  }
  if (roll_offset < 0) throw std::invalid_argument("roll_offset must be >= 0");
  if (correction.start_step < 0) {
    throw std::invalid_argument("correction.start_step must be >= 0");
  }
  if (!(correction.margin >= 0.0)) {
    throw std::invalid_argument("correction.margin must be >= 0");
  }
  if (correction.max_per_step < 0) {
    throw std::invalid_argument("correction.max_per_step must be >= 0");
  }
}

int SampleTrace::corrected_total() const {
  int total = 0;
  for (const StepTrace& s : steps) {
    total += static_cast<int>(s.corrections.size());
  }
  return total;
}

Logits cfg_combine(const Logits& cond, const Logits& uncond, double w) {
  if (cond.rows() != uncond.rows() || cond.cols() != uncond.cols()) {
    throw std::invalid_argument("cfg_combine: shape mismatch");
  }
  if (!(w >= 0.0)) throw std::invalid_argument("cfg_combine: w must be >= 0");
  if (w == 0.0) return cond;
  return (1.0 + w) * cond - w * uncond;
}

Logits guided_logits(const Predictor& predictor, const TokenGrid& grid,
                     int class_label, double cfg_weight) {
  Logits cond = predictor.logits(grid, class_label);
  if (cfg_weight == 0.0) return cond;
  Logits uncond = predictor.logits(grid, predictor.null_label);
  return cfg_combine(cond, uncond, cfg_weight);
}

std::pair<TokenGrid, std::vector<Correction>> correct_context(
    const Logits& logits, const TokenGrid& grid, const CorrectionRule& rule,
    double temperature, Rng& rng) {
  if (logits.rows() != grid.size()) {
    throw std::invalid_argument("correct_context: logits must cover the grid");
  }

  struct Candidate {
    double gap;
    int position;
  };
  std::vector<Candidate> candidates;
  for (int i = 0; i < grid.size(); ++i) {
    if (grid.is_masked(i)) continue;
    Eigen::VectorXd p = softmax_vector(logits.row(i).transpose());
    double gap = p.maxCoeff() - p(grid.cell(i));
    if (gap > rule.margin) candidates.push_back({gap, i});
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.gap != b.gap) return a.gap > b.gap;
              return a.position < b.position;
            });
  std::size_t take = std::min(candidates.size(),
                              static_cast<std::size_t>(rule.max_per_step));

  std::vector<Correction> corrections;
  std::vector<int> positions;
  std::vector<Token> values;
  for (std::size_t k = 0; k < take; ++k) {
    int i = candidates[k].position;
    Token fresh = draw_token(logits.row(i).transpose(), temperature, rng);
    if (fresh == grid.cell(i)) continue;  // resample landed on the same token
    corrections.push_back({i, grid.cell(i), fresh});
    positions.push_back(i);
    values.push_back(fresh);
  }
  if (positions.empty()) return {grid, corrections};
  return {apply_tokens(grid, positions, values), corrections};
}

std::pair<TokenGrid, StepTrace> sample_step(const Predictor& predictor,
                                            const TokenGrid& grid,
                                            const std::vector<int>& group,
                                            int step_index, int class_label,
                                            const SampleConfig& config,
                                            Rng& rng) {
  StepTrace trace;
  trace.step = step_index;
  trace.revealed = group;

  Logits logits = guided_logits(predictor, grid, class_label,
                                config.cfg_weight);
  if (logits.rows() != grid.size()) {
    throw std::invalid_argument("sample_step: logits must cover the grid");
  }

  std::vector<Token> values;
  values.reserve(group.size());
  double top_prob_sum = 0.0;
  for (int i : group) {
    if (!grid.is_masked(i)) {
      throw std::invalid_argument("sample_step: group holds a revealed cell");
    }
    Eigen::VectorXd row = logits.row(i).transpose();
    top_prob_sum += softmax_vector(row).maxCoeff();
    values.push_back(draw_token(row, config.temperature, rng));
  }
  if (!group.empty()) {
    trace.mean_top_prob = top_prob_sum / static_cast<double>(group.size());
  }
  TokenGrid revealed = apply_tokens(grid, group, values);

  const CorrectionRule& rule = config.correction;
  if (rule.enabled && step_index >= rule.start_step && rule.max_per_step > 0) {
    // Fresh scores: the pass must see the tokens this step just wrote.
    Logits fresh = guided_logits(predictor, revealed, class_label,
                                 config.cfg_weight);
    auto [fixed, corrections] =
        correct_context(fresh, revealed, rule, config.temperature, rng);
    trace.corrections = std::move(corrections);
    return {std::move(fixed), std::move(trace)};
  }
  return {std::move(revealed), std::move(trace)};
}

std::pair<TokenGrid, SampleTrace> sample(const Predictor& predictor,
                                         const Vocabulary& vocab, int height,
                                         int width, int class_label,
                                         const SampleConfig& config,
                                         SampleTrace* partial_out) {
  config.validate();
  const int n = height * width;

  OrderPlan plan = make_order(config.order, height, width, config.seed);
  Rng rng = derive_rng(config.seed, stream::kSample);
  if (config.random_roll && n > 1) {
    plan = roll(plan, static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
  } else if (config.roll_offset != 0) {
    plan = roll(plan, config.roll_offset);
  }
  StepSchedule schedule = group_sizes(n, config.steps, config.scheduler);
  GroupPartition groups = partition(plan, schedule);

  TokenGrid grid = new_fully_masked(height, width, vocab);
  SampleTrace trace;
  trace.steps.reserve(groups.groups.size());
  for (int s = 0; s < static_cast<int>(groups.groups.size()); ++s) {
    auto [next, step_trace] = sample_step(predictor, grid, groups.groups[s], s,
                                          class_label, config, rng);
    grid = std::move(next);
    trace.steps.push_back(step_trace);
    if (partial_out != nullptr) partial_out->steps.push_back(step_trace);
  }
  return {std::move(grid), std::move(trace)};
}

}  // namespace maskfix

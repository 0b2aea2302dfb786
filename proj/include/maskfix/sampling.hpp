#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "maskfix/predictor.hpp"
#include "maskfix/rng.hpp"
#include "maskfix/sequencing.hpp"
#include "maskfix/token_grid.hpp"

namespace maskfix {

// After a reveal step, already-emitted tokens the model now scores as
// unlikely get resampled. A position qualifies when the probability gap
// between the model's favourite token and the current one exceeds `margin`;
// at most `max_per_step` positions are rewritten per step, largest gap
// first. margin = 1 or max_per_step = 0 disables the pass in effect.
struct CorrectionRule {
  bool enabled = false;
  int start_step = 6;   // first step index the pass runs at
  double margin = 0.0;  // minimum probability gap to qualify
  int max_per_step = 1;
};

struct SampleConfig {
  int steps = 32;  // reveal groups (m)
  OrderKind order = OrderKind::halton;
  bool random_roll = false;
  int roll_offset = 0;  // used when random_roll is off
  ScheduleKind scheduler = ScheduleKind::arccos;
  double temperature = 1.0;  // > 0; applied to every categorical draw
  double cfg_weight = 0.0;   // guidance strength w >= 0
  CorrectionRule correction;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Correction {
  int position = 0;
  Token old_value = 0;
  Token new_value = 0;
};

struct StepTrace {
  int step = 0;
  std::vector<int> revealed;
  std::vector<Correction> corrections;  // only tokens that actually changed
  double mean_top_prob = 0.0;  // mean max softmax prob over revealed cells
};

struct SampleTrace {
  std::vector<StepTrace> steps;
  int corrected_total() const;
};

// Guidance in logit space: (1 + w) * cond - w * uncond. w = 0 returns the
// conditional scores unchanged.
Logits cfg_combine(const Logits& cond, const Logits& uncond, double w);

// Runs the predictor with the given label; when w > 0 a second call with the
// predictor's null label supplies the unconditional branch for cfg_combine.
Logits guided_logits(const Predictor& predictor, const TokenGrid& grid,
                     int class_label, double cfg_weight);

// One resample pass over the unmasked cells of `grid` using `logits` (one
// row per position). Returns the updated grid and the corrections applied;
// masked cells are never touched.
std::pair<TokenGrid, std::vector<Correction>> correct_context(
    const Logits& logits, const TokenGrid& grid, const CorrectionRule& rule,
    double temperature, Rng& rng);

// Reveals the given group: one guided forward, an independent categorical
// draw per group position at the config temperature, then (when enabled and
// step_index >= start_step) a correction pass against a fresh forward on the
// updated grid.
std::pair<TokenGrid, StepTrace> sample_step(const Predictor& predictor,
                                            const TokenGrid& grid,
                                            const std::vector<int>& group,
                                            int step_index, int class_label,
                                            const SampleConfig& config,
                                            Rng& rng);

// Full generation: fully-masked start, partition of the configured order
// into config.steps groups, sample_step for each. The result has no masked
// cells. When partial_out is non-null every finished step is appended to it
// as well, so a caller still holds the trace-so-far if a step throws.
std::pair<TokenGrid, SampleTrace> sample(const Predictor& predictor,
                                         const Vocabulary& vocab, int height,
                                         int width, int class_label,
                                         const SampleConfig& config,
                                         SampleTrace* partial_out = nullptr);

}  // namespace maskfix

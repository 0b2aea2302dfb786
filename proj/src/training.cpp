#include "maskfix/training.hpp"

#include <cmath>

namespace maskfix {

void TrainConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha outside [0, 1]");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (adam_eps <= 0.0) throw std::invalid_argument("adam_eps must be positive");
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (warmup_steps < 0 || warmup_steps >= total_steps) {
    throw std::invalid_argument("need 0 <= warmup_steps < total_steps");
  }
  if (grad_clip_norm < 0.0) throw std::invalid_argument("grad_clip_norm must be >= 0");
  if (cfg_dropout < 0.0 || cfg_dropout > 1.0) throw std::invalid_argument("cfg_dropout outside [0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout outside [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be >= 1");
  if (decay_tail_fraction < 0.0 || decay_tail_fraction > 1.0) {
    throw std::invalid_argument("decay_tail_fraction outside [0, 1]");
  }
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
}

TrainExample build_training_example(const TokenGrid& clean_grid,
                                    const OrderPlan& plan,
                                    const StepSchedule& schedule, double alpha,
                                    Rng& rng) {
  int n = clean_grid.size();
  if (static_cast<int>(plan.order.size()) != n) {
    throw std::invalid_argument("order plan does not cover the grid");
  }
  if (clean_grid.masked_count() != 0) {
    throw std::invalid_argument("training grids must be complete");
  }

  GroupPartition parts = partition(plan, schedule);
  int m = schedule.steps;
  int s = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));

  TrainExample example{clean_grid, {}};
  example.targets.clean = clean_grid.cells();
  example.targets.tags.assign(static_cast<std::size_t>(n), TargetTag::ignored);
  example.targets.step_index = s;

  std::vector<int> context;
  std::vector<int> to_mask;
  for (int g = 0; g < m; ++g) {
    for (int pos : parts.groups[static_cast<std::size_t>(g)]) {
      if (g < s) {
        context.push_back(pos);
        example.targets.tags[static_cast<std::size_t>(pos)] = TargetTag::context;
      } else if (g == s) {
        to_mask.push_back(pos);
        example.targets.tags[static_cast<std::size_t>(pos)] = TargetTag::next;
      } else {
        to_mask.push_back(pos);
      }
    }
  }

  // Corrupt the visible prefix first, then mask the rest. The injection pool
  // is the full clean image, matching the training-time recipe.
  CorruptionSpec spec{alpha, rng.raw()};
  auto [corrupted, record] = inject_random_tokens(clean_grid, context, spec);
  example.targets.corruption = record;

  std::vector<Token> cells = corrupted.cells();
  for (int pos : to_mask) {
    cells[static_cast<std::size_t>(pos)] = clean_grid.vocab().mask_id();
  }
  example.input = TokenGrid(clean_grid.height(), clean_grid.width(),
                            clean_grid.vocab(), std::move(cells));
  return example;
}

double lr_at(long long step_index, const TrainConfig& config) {
  if (step_index < 0 || step_index >= config.total_steps) {
    throw std::invalid_argument("step index outside [0, total_steps)");
  }
  double lr = config.learning_rate;
  if (step_index < config.warmup_steps) {
    return lr * static_cast<double>(step_index) /
           static_cast<double>(config.warmup_steps);
  }
  long long decay_start = static_cast<long long>(
      std::llround((1.0 - config.decay_tail_fraction) *
                   static_cast<double>(config.total_steps)));
  if (decay_start < config.warmup_steps) decay_start = config.warmup_steps;
  if (step_index < decay_start) return lr;
  // Cosine from the plateau down to exactly zero at the final step.
  long long span = config.total_steps - 1 - decay_start;
  if (span < 1) span = 1;
  double progress = static_cast<double>(step_index - decay_start) /
                    static_cast<double>(span);
  if (progress > 1.0) progress = 1.0;
  return lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace maskfix

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "maskfix/corruption.hpp"
#include "maskfix/model.hpp"
#include "maskfix/rng.hpp"
#include "maskfix/sequencing.hpp"
#include "maskfix/threading.hpp"
#include "maskfix/token_grid.hpp"

namespace maskfix {

struct TrainConfig {
  double alpha = 0.2;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.03;
  long long warmup_steps = 2500;
  double grad_clip_norm = 1.0;
  double cfg_dropout = 0.1;
  double dropout = 0.1;
  int batch_size = 128;
  long long total_steps = 10000;
  double decay_tail_fraction = 0.10;
  std::uint64_t seed = 0;
  int steps = 32;  // reveal groups per example (m)
  OrderKind order = OrderKind::halton;
  bool random_roll = true;
  ScheduleKind scheduler = ScheduleKind::arccos;

  void validate() const;
};

// Per-position role in the loss. "next" positions are the group being
// revealed and feed the next-token loss; "context" positions are the visible
// (possibly corrupted) prefix and feed the context loss; later groups are
// ignored entirely.
enum class TargetTag : unsigned char { ignored, next, context };

struct TrainTargets {
  std::vector<Token> clean;     // uncorrupted token per position
  std::vector<TargetTag> tags;  // one per position
  CorruptionRecord corruption;
  int step_index = 0;  // which group was drawn as "next"
};

struct TrainExample {
  TokenGrid input;
  TrainTargets targets;
};

struct TrainMetrics {
  double loss_next = 0.0;
  double loss_context = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm
  double lr = 0.0;
  // Filled by evaluation hooks, not by training itself.
  double corrected_tokens = 0.0;
};

// Draws a step index s uniformly, masks groups s..m-1, corrupts the context
// groups 0..s-1 at rate alpha, and tags every position for the two losses.
// Labels are always the CLEAN tokens: a corrupted cell keeps its clean value
// as the target.
TrainExample build_training_example(const TokenGrid& clean_grid,
                                    const OrderPlan& plan,
                                    const StepSchedule& schedule, double alpha,
                                    Rng& rng);

// Learning-rate schedule: linear warmup from zero, flat plateau, then cosine
// decay to exactly zero across the final decay_tail_fraction of training.
double lr_at(long long step_index, const TrainConfig& config);

namespace detail {

// Numerically stable -log softmax(row)[target] accumulated in double.
template <typename Scalar>
double row_nll(const MatT<Scalar>& logits, int row, Token target) {
  double row_max = static_cast<double>(logits.row(row).maxCoeff());
  double sum = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    sum += std::exp(static_cast<double>(logits(row, c)) - row_max);
  }
  return std::log(sum) -
         (static_cast<double>(logits(row, target)) - row_max);
}

}  // namespace detail

// Mean negative log-likelihood of the clean tokens over the next group.
template <typename Scalar>
double loss_next(const MatT<Scalar>& logits, const TrainTargets& targets) {
  double total = 0.0;
  long long count = 0;
  for (std::size_t i = 0; i < targets.tags.size(); ++i) {
    if (targets.tags[i] == TargetTag::next) {
      total += detail::row_nll(logits, static_cast<int>(i), targets.clean[i]);
      ++count;
    }
  }
  if (count == 0) {
    throw std::invalid_argument("no next-group positions to score");
  }
  return total / static_cast<double>(count);
}

// Mean negative log-likelihood of the clean tokens over every context
// position, corrupted or not. Empty context scores zero: the sum simply has
// no terms when the drawn step is zero.
template <typename Scalar>
double loss_context(const MatT<Scalar>& logits, const TrainTargets& targets,
                    const CorruptionRecord& /*record*/) {
  double total = 0.0;
  long long count = 0;
  for (std::size_t i = 0; i < targets.tags.size(); ++i) {
    if (targets.tags[i] == TargetTag::context) {
      total += detail::row_nll(logits, static_cast<int>(i), targets.clean[i]);
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

// d(loss_next + loss_context)/dlogits for one example: softmax minus one-hot
// on the scored rows, each divided by its category's position count.
template <typename Scalar>
MatT<Scalar> loss_gradient(const MatT<Scalar>& logits,
                           const TrainTargets& targets) {
  long long n_next = 0, n_context = 0;
  for (TargetTag tag : targets.tags) {
    if (tag == TargetTag::next) ++n_next;
    if (tag == TargetTag::context) ++n_context;
  }
  MatT<Scalar> grad = MatT<Scalar>::Zero(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < targets.tags.size(); ++i) {
    TargetTag tag = targets.tags[i];
    if (tag == TargetTag::ignored) continue;
    long long count = tag == TargetTag::next ? n_next : n_context;
    int row = static_cast<int>(i);
    Scalar row_max = logits.row(row).maxCoeff();
    VecT<Scalar> p =
        (logits.row(row).array() - row_max).exp().matrix().transpose();
    p /= p.sum();
    p(targets.clean[i]) -= Scalar(1);
    grad.row(row) = p.transpose() / static_cast<Scalar>(count);
  }
  return grad;
}

template <typename Scalar>
struct AdamStateT {
  ParametersT<Scalar> m;
  ParametersT<Scalar> v;
  long long step = 0;
};

using AdamState = AdamStateT<float>;

template <typename Scalar>
AdamStateT<Scalar> make_adam_state(const ParametersT<Scalar>& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

template <typename Scalar>
double global_norm(const ParametersT<Scalar>& grads) {
  double sum_sq = 0.0;
  grads.for_each_tensor([&](const std::string&, const MatT<Scalar>& m) {
    sum_sq += static_cast<double>(m.template cast<double>().squaredNorm());
  });
  return std::sqrt(sum_sq);
}

template <typename Scalar>
void scale_tensors(ParametersT<Scalar>& grads, double factor) {
  grads.for_each_tensor([&](const std::string&, MatT<Scalar>& m) {
    m *= static_cast<Scalar>(factor);
  });
}

// Decoupled AdamW: weight decay multiplies the parameter before the Adam
// step, so zero gradients still shrink weights by exactly (1 - lr * wd).
template <typename Scalar>
void adamw_update(ParametersT<Scalar>& params, AdamStateT<Scalar>& state,
                  const ParametersT<Scalar>& grads, double lr,
                  const TrainConfig& config) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, state.step);
  const double bc2 = 1.0 - std::pow(config.adam_beta2, state.step);
  const Scalar beta1 = static_cast<Scalar>(config.adam_beta1);
  const Scalar beta2 = static_cast<Scalar>(config.adam_beta2);
  const Scalar eps = static_cast<Scalar>(config.adam_eps);
  const Scalar decay = static_cast<Scalar>(1.0 - lr * config.weight_decay);
  const Scalar step_m = static_cast<Scalar>(lr / bc1);
  const Scalar inv_sqrt_bc2 = static_cast<Scalar>(1.0 / std::sqrt(bc2));

  // Walk the three parameter sets in lockstep; for_each_tensor visits
  // tensors in the same fixed order every time.
  std::vector<MatT<Scalar>*> p_list, m_list, v_list;
  std::vector<const MatT<Scalar>*> g_list;
  params.for_each_tensor(
      [&](const std::string&, MatT<Scalar>& t) { p_list.push_back(&t); });
  state.m.for_each_tensor(
      [&](const std::string&, MatT<Scalar>& t) { m_list.push_back(&t); });
  state.v.for_each_tensor(
      [&](const std::string&, MatT<Scalar>& t) { v_list.push_back(&t); });
  grads.for_each_tensor(
      [&](const std::string&, const MatT<Scalar>& t) { g_list.push_back(&t); });

  for (std::size_t i = 0; i < p_list.size(); ++i) {
    MatT<Scalar>& p = *p_list[i];
    MatT<Scalar>& m = *m_list[i];
    MatT<Scalar>& v = *v_list[i];
    const MatT<Scalar>& g = *g_list[i];
    m = beta1 * m + (Scalar(1) - beta1) * g;
    v = (beta2 * v.array() + (Scalar(1) - beta2) * g.array().square()).matrix();
    p *= decay;
    p -= step_m *
         (m.array() / (v.array().sqrt() * inv_sqrt_bc2 + eps)).matrix();
  }
}

// One optimizer step over a batch of (clean grid, class label) pairs.
// Per-example randomness (roll offset, step draw, corruption, label dropout,
// dropout masks) is derived from (config.seed, step_index, example index), so
// the result is a pure function of those ids: resuming at this step replays
// it bit-exactly. Examples are processed in eight fixed shards accumulated in
// a fixed order, which keeps the update bit-identical for any thread count.
// Throws NumericError (leaving params untouched) when the loss goes
// non-finite.
template <typename Scalar>
TrainMetrics training_step(ParametersT<Scalar>& params,
                           AdamStateT<Scalar>& state,
                           const std::vector<std::pair<TokenGrid, int>>& batch,
                           const TrainConfig& config, long long step_index) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const ModelConfig& model_config = params.config;
  const int n = model_config.positions;
  const int batch_size = static_cast<int>(batch.size());
  const int h = batch.front().first.height();
  const int w = batch.front().first.width();
  StepSchedule schedule = group_sizes(n, config.steps, config.scheduler);

  constexpr int kShards = 8;
  std::vector<ParametersT<Scalar>> shard_grads;
  std::vector<double> shard_next(kShards, 0.0), shard_context(kShards, 0.0);
  shard_grads.reserve(kShards);
  for (int s = 0; s < kShards; ++s) shard_grads.push_back(zeros_like(params));

  parallel_shards(kShards, [&](int shard) {
    for (int e = shard; e < batch_size; e += kShards) {
      const TokenGrid& clean = batch[static_cast<std::size_t>(e)].first;
      int label = batch[static_cast<std::size_t>(e)].second;
      Rng ex_rng = derive_rng(config.seed, stream::kExample,
                              static_cast<std::uint64_t>(step_index),
                              static_cast<std::uint64_t>(e));

      OrderPlan plan = make_order(config.order, h, w, ex_rng.raw());
      if (config.random_roll && n > 1) {
        plan = roll(plan, ex_rng.below_int(n));
      }
      TrainExample example =
          build_training_example(clean, plan, schedule, config.alpha, ex_rng);
      if (ex_rng.uniform() < config.cfg_dropout) {
        label = model_config.null_label();
      }

      Rng drop_rng = derive_rng(config.seed, stream::kDropout,
                                static_cast<std::uint64_t>(step_index),
                                static_cast<std::uint64_t>(e));
      ForwardCache<Scalar> cache;
      MatT<Scalar> logits =
          forward_cached(params, example.input, label, DropoutMode::on,
                         &drop_rng, cache);
      shard_next[shard] += loss_next(logits, example.targets);
      shard_context[shard] +=
          loss_context(logits, example.targets, example.targets.corruption);
      MatT<Scalar> dlogits = loss_gradient(logits, example.targets);
      ParametersT<Scalar> g =
          backward_cached(params, example.input, label, cache, dlogits);

      ParametersT<Scalar>& acc = shard_grads[static_cast<std::size_t>(shard)];
      std::vector<MatT<Scalar>*> acc_list;
      acc.for_each_tensor(
          [&](const std::string&, MatT<Scalar>& t) { acc_list.push_back(&t); });
      std::size_t idx = 0;
      g.for_each_tensor([&](const std::string&, const MatT<Scalar>& t) {
        *acc_list[idx++] += t;
      });
    }
  });

  TrainMetrics metrics;
  ParametersT<Scalar> grads = zeros_like(params);
  {
    std::vector<MatT<Scalar>*> total_list;
    grads.for_each_tensor(
        [&](const std::string&, MatT<Scalar>& t) { total_list.push_back(&t); });
    for (int s = 0; s < kShards; ++s) {
      std::size_t idx = 0;
      shard_grads[static_cast<std::size_t>(s)].for_each_tensor(
          [&](const std::string&, const MatT<Scalar>& t) {
            *total_list[idx++] += t;
          });
      metrics.loss_next += shard_next[static_cast<std::size_t>(s)];
      metrics.loss_context += shard_context[static_cast<std::size_t>(s)];
    }
  }
  scale_tensors(grads, 1.0 / batch_size);
  metrics.loss_next /= batch_size;
  metrics.loss_context /= batch_size;
  metrics.loss = metrics.loss_next + metrics.loss_context;
  metrics.lr = lr_at(step_index, config);

  if (!std::isfinite(metrics.loss)) {
    throw NumericError("non-finite loss at step " + std::to_string(step_index));
  }

  metrics.grad_norm = global_norm(grads);
  if (config.grad_clip_norm > 0.0 && metrics.grad_norm > config.grad_clip_norm) {
    scale_tensors(grads, config.grad_clip_norm / metrics.grad_norm);
  }
  adamw_update(params, state, grads, metrics.lr, config);
  return metrics;
}

}  // namespace maskfix

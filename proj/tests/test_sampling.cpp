#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "maskfix/errors.hpp"
#include "maskfix/micro.hpp"
#include "maskfix/model.hpp"
#include "maskfix/predictor.hpp"
#include "maskfix/rng.hpp"
#include "maskfix/sampling.hpp"

using namespace maskfix;

namespace {

SampleConfig plain_config(int steps, std::uint64_t seed) {
  SampleConfig c;
  c.steps = steps;
  c.order = OrderKind::raster;
  c.scheduler = ScheduleKind::constant;
  c.seed = seed;
  return c;
}

bool grids_equal(const TokenGrid& a, const TokenGrid& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i) {
    if (a.cell(i) != b.cell(i)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cfg_combine follows the guidance formula") {
  Logits cond(1, 2), uncond(1, 2);
  cond << 2.0, 0.0;
  uncond << 1.0, 0.0;

  Logits out = cfg_combine(cond, uncond, 1.0);
  CHECK(out(0, 0) == doctest::Approx(3.0));
  CHECK(out(0, 1) == doctest::Approx(0.0));

  Logits same = cfg_combine(cond, uncond, 0.0);
  CHECK((same - cond).cwiseAbs().maxCoeff() == 0.0);

  Logits strong = cfg_combine(cond, uncond, 4.0);
  CHECK(strong(0, 0) == doctest::Approx(5.0 * 2.0 - 4.0 * 1.0));

  Logits bad(2, 2);
  CHECK_THROWS_AS(cfg_combine(cond, bad, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(cfg_combine(cond, uncond, -0.5), std::invalid_argument);
}

TEST_CASE("guided logits feed the null-class branch into the combination") {
  // A model predictor with live conditioning: guidance must equal combining
  // the label branch with the null-label branch by hand.
  ModelConfig cfg{1, 8, 2, 3, 4, 2, 0.0};
  auto params = random_parameters<double>(cfg, 21);
  Predictor pred;
  pred.null_label = cfg.null_label();
  pred.logits = [&params](const TokenGrid& grid, int label) {
    return forward(params, grid, label);
  };

  Vocabulary vocab(cfg.vocab);
  TokenGrid grid(2, 2, vocab, {0, 3, 2, 3});
  Logits by_hand = cfg_combine(pred.logits(grid, 1),
                               pred.logits(grid, cfg.null_label()), 2.5);
  Logits guided = guided_logits(pred, grid, 1, 2.5);
  CHECK((guided - by_hand).cwiseAbs().maxCoeff() == 0.0);

  // The oracle ignores labels, so guidance collapses to the plain scores.
  Predictor oracle = make_oracle_predictor(xor_pair_micro());
  TokenGrid pair(1, 2, Vocabulary(2), {0, 2});
  Logits w0 = guided_logits(oracle, pair, 0, 0.0);
  Logits w4 = guided_logits(oracle, pair, 0, 4.0);
  CHECK((w4 - w0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("correction pass flips an inconsistent pair to a consistent one") {
  Predictor oracle = make_oracle_predictor(xor_pair_micro());
  Vocabulary vocab(2);
  TokenGrid broken(1, 2, vocab, {0, 1});  // off-support under the pair law
  Logits logits = oracle.logits(broken, 0);

  CorrectionRule rule;
  rule.enabled = true;
  rule.margin = 0.0;
  rule.max_per_step = 1;
  Rng rng(7);

  auto [fixed, corrections] = correct_context(logits, broken, rule, 1.0, rng);
  REQUIRE(corrections.size() == 1);
  CHECK(corrections[0].position == 0);  // equal gaps break ties downward
  CHECK(corrections[0].old_value == 0);
  CHECK(corrections[0].new_value == 1);
  CHECK(fixed.cell(0) == fixed.cell(1));
}

TEST_CASE("correction pass boundary behavior") {
  Predictor oracle = make_oracle_predictor(xor_pair_micro());
  Vocabulary vocab(2);
  TokenGrid broken(1, 2, vocab, {0, 1});
  TokenGrid consistent(1, 2, vocab, {1, 1});
  Logits logits_broken = oracle.logits(broken, 0);
  Logits logits_ok = oracle.logits(consistent, 0);
  Rng rng(3);

  CorrectionRule rule;
  rule.max_per_step = 4;

  SUBCASE("an impossible margin disables every correction") {
    rule.margin = 1.0;
    auto [grid, corrections] =
        correct_context(logits_broken, broken, rule, 1.0, rng);
    CHECK(corrections.empty());
    CHECK(grids_equal(grid, broken));
  }

  SUBCASE("argmax tokens everywhere leave the corrected set empty") {
    rule.margin = 0.0;
    auto [grid, corrections] =
        correct_context(logits_ok, consistent, rule, 1.0, rng);
    CHECK(corrections.empty());
    CHECK(grids_equal(grid, consistent));
  }

  SUBCASE("budget caps the number of rewrites") {
    rule.margin = 0.0;
    rule.max_per_step = 1;
    auto [grid, corrections] =
        correct_context(logits_broken, broken, rule, 1.0, rng);
    CHECK(corrections.size() <= 1);
    (void)grid;
  }

  SUBCASE("masked cells are never candidates") {
    TokenGrid half(1, 2, vocab, {0, vocab.mask_id()});
    Logits logits = oracle.logits(half, 0);
    rule.margin = 0.0;
    auto [grid, corrections] = correct_context(logits, half, rule, 1.0, rng);
    CHECK(grid.is_masked(1));
    for (const Correction& c : corrections) CHECK(c.position != 1);
  }

  SUBCASE("zero budget is a no-op") {
    rule.max_per_step = 0;
    auto [grid, corrections] =
        correct_context(logits_broken, broken, rule, 1.0, rng);
    CHECK(corrections.empty());
    CHECK(grids_equal(grid, broken));
  }
}

TEST_CASE("sampling reveals monotonically and finishes complete") {
  MicroDistribution micro = random_micro(2, 2, 2, 5);
  Predictor oracle = make_oracle_predictor(micro);
  Vocabulary vocab(2);

  SampleConfig config = plain_config(3, 17);
  config.order = OrderKind::halton;
  config.scheduler = ScheduleKind::arccos;
  config.correction.enabled = true;
  config.correction.start_step = 0;
  config.correction.max_per_step = 2;

  auto [grid, trace] = sample(oracle, vocab, 2, 2, 0, config);
  CHECK(is_complete(grid));
  REQUIRE(trace.steps.size() == 3);

  int revealed_so_far = 0;
  for (const StepTrace& st : trace.steps) {
    revealed_so_far += static_cast<int>(st.revealed.size());
    for (const Correction& c : st.corrections) {
      CHECK(c.old_value != c.new_value);
      CHECK(vocab.valid_token(c.new_value));
    }
  }
  CHECK(revealed_so_far == 4);
  CHECK(trace.corrected_total() <= 3 * 2);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  MicroDistribution micro = random_micro(2, 2, 3, 9);
  Predictor oracle = make_oracle_predictor(micro);
  Vocabulary vocab(3);

  SampleConfig config = plain_config(2, 123);
  config.order = OrderKind::random;
  config.random_roll = true;
  config.correction.enabled = true;
  config.correction.start_step = 0;
  config.correction.max_per_step = 1;

  auto [grid_a, trace_a] = sample(oracle, vocab, 2, 2, 0, config);
  auto [grid_b, trace_b] = sample(oracle, vocab, 2, 2, 0, config);
  CHECK(grids_equal(grid_a, grid_b));
  REQUIRE(trace_a.steps.size() == trace_b.steps.size());
  for (std::size_t s = 0; s < trace_a.steps.size(); ++s) {
    CHECK(trace_a.steps[s].revealed == trace_b.steps[s].revealed);
    REQUIRE(trace_a.steps[s].corrections.size() ==
            trace_b.steps[s].corrections.size());
    for (std::size_t k = 0; k < trace_a.steps[s].corrections.size(); ++k) {
      CHECK(trace_a.steps[s].corrections[k].position ==
            trace_b.steps[s].corrections[k].position);
      CHECK(trace_a.steps[s].corrections[k].new_value ==
            trace_b.steps[s].corrections[k].new_value);
    }
  }

  SampleConfig other = config;
  other.seed = 124;
  auto [grid_c, trace_c] = sample(oracle, vocab, 2, 2, 0, other);
  (void)trace_c;
  // Not guaranteed to differ, but overwhelmingly likely on a 2x2 V=3 grid.
  bool any_diff = !grids_equal(grid_a, grid_c);
  for (std::size_t s = 0; s < trace_a.steps.size() && !any_diff; ++s) {
    any_diff = trace_a.steps[s].revealed != trace_c.steps[s].revealed;
  }
  CHECK(any_diff);
}

TEST_CASE("near-zero temperature reduces every draw to argmax") {
  MicroDistribution micro = random_micro(1, 2, 3, 31);
  Predictor oracle = make_oracle_predictor(micro);
  Vocabulary vocab(3);

  // Greedy reference: reveal position 0 then 1, taking the exact
  // conditional argmax each time.
  TokenGrid partial = new_fully_masked(1, 2, vocab);
  for (int pos = 0; pos < 2; ++pos) {
    Logits logits = oracle.logits(partial, 0);
    int best = 0;
    logits.row(pos).maxCoeff(&best);
    partial = apply_tokens(partial, {pos}, {best});
  }

  SampleConfig config = plain_config(2, 555);
  config.temperature = 1e-9;
  auto [greedy, trace] = sample(oracle, vocab, 1, 2, 0, config);
  (void)trace;
  CHECK(grids_equal(greedy, partial));
}

TEST_CASE("parallel reveal of a correlated pair fails half the time") {
  // Both tokens drawn independently from uniform marginals agree only half
  // the time; the correction pass repairs nearly every disagreement.
  Predictor oracle = make_oracle_predictor(xor_pair_micro());
  Vocabulary vocab(2);
  const int draws = 2000;

  SampleConfig plain = plain_config(1, 0);
  SampleConfig corrected = plain;
  corrected.correction.enabled = true;
  corrected.correction.start_step = 0;
  corrected.correction.margin = 0.0;
  corrected.correction.max_per_step = 1;

  int violations_plain = 0, violations_corrected = 0;
  int corrected_tokens = 0;
  for (int i = 0; i < draws; ++i) {
    std::uint64_t seed = derive_rng(99, stream::kDraw, i).raw();
    plain.seed = seed;
    corrected.seed = seed;
    auto [g1, t1] = sample(oracle, vocab, 1, 2, 0, plain);
    auto [g2, t2] = sample(oracle, vocab, 1, 2, 0, corrected);
    if (g1.cell(0) != g1.cell(1)) ++violations_plain;
    if (g2.cell(0) != g2.cell(1)) ++violations_corrected;
    corrected_tokens += t2.corrected_total();
    CHECK(t1.corrected_total() == 0);
  }

  double rate_plain = violations_plain / static_cast<double>(draws);
  double rate_corrected = violations_corrected / static_cast<double>(draws);
  CHECK(rate_plain > 0.45);
  CHECK(rate_plain < 0.55);
  CHECK(rate_corrected < 0.01);
  // Every repaired draw rewired exactly one token.
  CHECK(corrected_tokens == violations_plain - violations_corrected);
}

TEST_CASE("sequential oracle sampling matches the exact joint") {
  MicroDistribution micro = random_micro(2, 2, 2, 41);
  Predictor oracle = make_oracle_predictor(micro);
  Vocabulary vocab(2);
  const int draws = 20000;

  SampleConfig config = plain_config(4, 0);  // one position per step
  std::map<std::size_t, int> counts;
  for (int i = 0; i < draws; ++i) {
    config.seed = derive_rng(7, stream::kDraw, i).raw();
    auto [grid, trace] = sample(oracle, vocab, 2, 2, 0, config);
    (void)trace;
    std::vector<Token> cells;
    for (int p = 0; p < grid.size(); ++p) cells.push_back(grid.cell(p));
    counts[micro.index_of(cells)]++;
  }

  double tv = 0.0;
  for (std::size_t g = 0; g < micro.table().size(); ++g) {
    double empirical = 0.0;
    auto it = counts.find(g);
    if (it != counts.end()) empirical = it->second / double(draws);
    tv += std::abs(empirical - micro.table()[g]);
  }
  tv *= 0.5;
  CHECK(tv < 0.05);  // acceptance run tightens this at 100k draws
}

TEST_CASE("a mid-run predictor failure leaves the partial trace behind") {
  Vocabulary vocab(2);
  int calls = 0;
  Predictor flaky;
  flaky.logits = [&calls](const TokenGrid& grid, int) -> Logits {
    if (++calls > 2) throw NumericError("synthetic failure");
    return Logits::Zero(grid.size(), 2);
  };

  SampleConfig config = plain_config(4, 1);
  SampleTrace partial;
  CHECK_THROWS_AS(
      sample(flaky, vocab, 2, 2, 0, config, &partial), NumericError);
  CHECK(partial.steps.size() == 2);
  CHECK(partial.steps[0].revealed == std::vector<int>{0});
  CHECK(partial.steps[1].revealed == std::vector<int>{1});
}

TEST_CASE("sample_step rejects groups holding revealed cells") {
  Predictor oracle = make_oracle_predictor(xor_pair_micro());
  Vocabulary vocab(2);
  TokenGrid grid(1, 2, vocab, {0, vocab.mask_id()});
  SampleConfig config = plain_config(1, 0);
  Rng rng(1);
  CHECK_THROWS_AS(
      sample_step(oracle, grid, {0, 1}, 0, 0, config, rng),
      std::invalid_argument);
}

TEST_CASE("sample config validation") {
  SampleConfig config = plain_config(1, 0);
  config.temperature = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = plain_config(0, 0);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = plain_config(1, 0);
  config.cfg_weight = -1.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = plain_config(1, 0);
  config.correction.margin = -0.1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = plain_config(1, 0);
  config.correction.max_per_step = -1;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("fixed roll offset shifts which cell is revealed first") {
  MicroDistribution micro = uniform_micro(1, 3, 2);
  Predictor oracle = make_oracle_predictor(micro);
  Vocabulary vocab(2);

  SampleConfig config = plain_config(3, 0);
  config.roll_offset = 1;
  auto [grid, trace] = sample(oracle, vocab, 1, 3, 0, config);
  (void)grid;
  REQUIRE(trace.steps.size() == 3);
  CHECK(trace.steps[0].revealed == std::vector<int>{1});
  CHECK(trace.steps[1].revealed == std::vector<int>{2});
  CHECK(trace.steps[2].revealed == std::vector<int>{0});
}

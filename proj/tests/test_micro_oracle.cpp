#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "maskfix/errors.hpp"
#include "maskfix/micro.hpp"
#include "maskfix/predictor.hpp"
#include "maskfix/token_grid.hpp"

using namespace maskfix;

TEST_CASE("grid index round-trips through mixed radix") {
  MicroDistribution micro = uniform_micro(2, 2, 3);
  CHECK(micro.outcomes() == 81);
  for (std::uint64_t g = 0; g < micro.outcomes(); ++g) {
    CHECK(micro.index_of(micro.cells_of(g)) == g);
  }
  CHECK(micro.index_of({1, 0, 0, 0}) == 1);
  CHECK(micro.index_of({0, 1, 0, 0}) == 3);
  CHECK_THROWS_AS(micro.index_of({0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(micro.index_of({0, 0, 0, 3}), std::invalid_argument);
}

TEST_CASE("constructor validates the table") {
  CHECK_THROWS_AS(MicroDistribution(1, 2, 2, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(MicroDistribution(1, 2, 2, {0.5, 0.5, 0.25, -0.25}),
                  std::invalid_argument);
  CHECK_THROWS_AS(MicroDistribution(1, 2, 2, {0.5, 0.5, 0.25, 0.25}),
                  std::invalid_argument);
  CHECK_THROWS_AS(MicroDistribution(4, 4, 16, std::vector<double>{}),
                  std::invalid_argument);
}

TEST_CASE("xor pair: masked cells see uniform marginals") {
  MicroDistribution micro = xor_pair_micro();
  TokenGrid masked = new_fully_masked(1, 2, Vocabulary(2));
  Eigen::MatrixXd logits = oracle_conditionals(micro, masked);
  REQUIRE(logits.rows() == 2);
  REQUIRE(logits.cols() == 2);
  for (int i = 0; i < 2; ++i) {
    for (int c = 0; c < 2; ++c) {
      CHECK(std::exp(logits(i, c)) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("xor pair: observing one cell pins the other") {
  MicroDistribution micro = xor_pair_micro();
  TokenGrid masked = new_fully_masked(1, 2, Vocabulary(2));
  TokenGrid observed = apply_tokens(masked, {0}, {0});
  Eigen::MatrixXd logits = oracle_conditionals(micro, observed);
  CHECK(std::exp(logits(1, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::exp(logits(1, 1)) == doctest::Approx(0.0).epsilon(1e-12));
  // Leave-one-out row for the observed cell itself: with nothing else
  // observed, it falls back to the marginal.
  CHECK(std::exp(logits(0, 0)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("uniform joint gives uniform rows regardless of context") {
  MicroDistribution micro = uniform_micro(2, 2, 3);
  TokenGrid grid = new_fully_masked(2, 2, Vocabulary(3));
  grid = apply_tokens(grid, {0, 3}, {2, 1});
  Eigen::MatrixXd logits = oracle_conditionals(micro, grid);
  for (int i = 0; i < 4; ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(std::exp(logits(i, c)) ==
            doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("oracle rows are normalized distributions") {
  MicroDistribution micro = random_micro(2, 2, 3, 17);
  TokenGrid grid = new_fully_masked(2, 2, Vocabulary(3));
  grid = apply_tokens(grid, {1}, {2});
  Eigen::MatrixXd logits = oracle_conditionals(micro, grid);
  for (int i = 0; i < logits.rows(); ++i) {
    double sum = 0.0;
    for (int c = 0; c < logits.cols(); ++c) sum += std::exp(logits(i, c));
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("sequential conditionals recover the joint for every grid") {
  // Reveal cells one at a time in position order; the summed log
  // conditionals must equal the log joint. This is the chain rule, so it
  // holds for any reveal order; position order keeps the test simple.
  MicroDistribution micro = random_micro(2, 2, 3, 23);
  Vocabulary vocab(3);
  for (std::uint64_t g = 0; g < micro.outcomes(); ++g) {
    std::vector<Token> cells = micro.cells_of(g);
    TokenGrid grid = new_fully_masked(2, 2, vocab);
    double log_prob = 0.0;
    for (int i = 0; i < 4; ++i) {
      Eigen::MatrixXd logits = oracle_conditionals(micro, grid);
      log_prob += logits(i, cells[static_cast<std::size_t>(i)]);
      grid = apply_tokens(grid, {i}, {cells[static_cast<std::size_t>(i)]});
    }
    CHECK(log_prob ==
          doctest::Approx(std::log(micro.probability(g))).epsilon(1e-9));
  }
}

TEST_CASE("zero-mass context raises a degenerate-context error") {
  MicroDistribution point(1, 2, 2, {1.0, 0.0, 0.0, 0.0});
  TokenGrid masked = new_fully_masked(1, 2, Vocabulary(2));
  TokenGrid impossible = apply_tokens(masked, {0}, {1});
  CHECK_THROWS_AS(oracle_conditionals(point, impossible),
                  DegenerateContextError);
}

TEST_CASE("dimension mismatch is rejected") {
  MicroDistribution micro = xor_pair_micro();
  TokenGrid wrong = new_fully_masked(2, 2, Vocabulary(2));
  CHECK_THROWS_AS(oracle_conditionals(micro, wrong), std::invalid_argument);
  TokenGrid wrong_vocab = new_fully_masked(1, 2, Vocabulary(3));
  CHECK_THROWS_AS(oracle_conditionals(micro, wrong_vocab),
                  std::invalid_argument);
}

TEST_CASE("oracle predictor wraps enumeration") {
  Predictor oracle = make_oracle_predictor(xor_pair_micro());
  TokenGrid masked = new_fully_masked(1, 2, Vocabulary(2));
  Logits logits = oracle.logits(masked, oracle.null_label);
  CHECK(std::exp(logits(0, 0)) == doctest::Approx(0.5).epsilon(1e-12));
  // Labels are ignored by the enumeration backend.
  Logits other = oracle.logits(masked, 1);
  CHECK((logits - other).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("softmax helpers normalize and keep order") {
  Eigen::MatrixXd logits(2, 3);
  logits << 1.0, 2.0, 3.0, 1000.0, 1000.0, 1000.0;
  Eigen::MatrixXd probs = softmax_rows(logits);
  CHECK(probs.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(probs(0, 2) > probs(0, 1));
  CHECK(probs(1, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  Eigen::MatrixXd logp = log_softmax_rows(logits);
  CHECK(std::exp(logp(0, 0)) == doctest::Approx(probs(0, 0)).epsilon(1e-12));
}

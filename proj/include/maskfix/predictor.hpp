#pragma once

#include <functional>

#include <Eigen/Dense>

#include "maskfix/micro.hpp"
#include "maskfix/token_grid.hpp"

namespace maskfix {

// n x V scores in the natural-log domain, one row per grid position. Rows
// exist for unmasked positions too: the context loss and the correction pass
// both score already-revealed tokens.
using Logits = Eigen::MatrixXd;

// Anything that maps (partially masked grid, class label) to per-position
// logits. label == null_label selects the unconditional branch.
struct Predictor {
  std::function<Logits(const TokenGrid& grid, int label)> logits;
  int null_label = 0;
};

// Numerically stable row-wise softmax / log-softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits);
Eigen::VectorXd softmax_vector(const Eigen::VectorXd& logits);

// Ground-truth predictor backed by exact enumeration. Ignores the class
// label entirely; null_label is 0.
Predictor make_oracle_predictor(MicroDistribution micro);

}  // namespace maskfix

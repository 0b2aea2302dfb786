#include "maskfix/predictor.hpp"

#include <memory>

namespace maskfix {

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double row_max = logits.row(i).maxCoeff();
    Eigen::ArrayXd shifted = (logits.row(i).array() - row_max).exp();
    out.row(i) = (shifted / shifted.sum()).matrix();
  }
  return out;
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double row_max = logits.row(i).maxCoeff();
    Eigen::ArrayXd shifted = logits.row(i).array() - row_max;
    double log_sum = std::log(shifted.exp().sum());
    out.row(i) = (shifted - log_sum).matrix();
  }
  return out;
}

Eigen::VectorXd softmax_vector(const Eigen::VectorXd& logits) {
  double v_max = logits.maxCoeff();
  Eigen::ArrayXd shifted = (logits.array() - v_max).exp();
  return (shifted / shifted.sum()).matrix();
}

Predictor make_oracle_predictor(MicroDistribution micro) {
  auto shared = std::make_shared<MicroDistribution>(std::move(micro));
  Predictor predictor;
  predictor.null_label = 0;
  predictor.logits = [shared](const TokenGrid& grid, int /*label*/) {
    return oracle_conditionals(*shared, grid);
  };
  return predictor;
}

}  // namespace maskfix

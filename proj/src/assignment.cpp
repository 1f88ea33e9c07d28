#include "turncredit/assignment.hpp"

namespace turncredit {

Matrix HardAssignment::indicator(Eigen::Index cols) const {
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(golden_of.size()), cols);
  for (std::size_t i = 0; i < golden_of.size(); ++i)
    if (golden_of[i] >= 0) x(static_cast<Eigen::Index>(i), golden_of[i]) = 1.0;
  return x;
}

CreditResult assign_credit(const Matrix& scores, const AssignmentConfig& config) {
  if (config.mode == CreditMode::hard) return hard_rewards(scores, config.penalty);

  const Eigen::Index m = scores.rows();
  const Eigen::Index n = scores.cols();
  if (m == 0 || n == 0) {
    // nothing to transport
    CreditResult out;
    out.mode = CreditMode::soft;
    out.penalty = config.penalty;
    out.per_call_rewards = Vector::Zero(m);
    TransportPlan empty;
    empty.plan = Matrix::Zero(m, n);
    empty.row_marginal = Vector::Constant(m, m ? 1.0 / static_cast<double>(m) : 0.0);
    empty.col_marginal = Vector::Constant(n, n ? 1.0 / static_cast<double>(n) : 0.0);
    empty.temperature = config.temperature;
    empty.converged = true;
    out.witness = std::move(empty);
    return out;
  }
  const Vector a = Vector::Constant(m, 1.0 / static_cast<double>(m));
  const Vector b = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const Matrix cost = cost_transform(scores, config.cost);
  const TransportPlan plan = sinkhorn_plan(cost, a, b, config.temperature, config.max_iter, config.tol);
  CreditResult out = soft_rewards(scores, plan);
  out.penalty = config.penalty;
  return out;
}

const char* to_string(CreditMode mode) { return mode == CreditMode::hard ? "km" : "ot"; }

const char* to_string(CostTransform transform) {
  switch (transform) {
    case CostTransform::linear: return "linear";
    case CostTransform::normalized: return "normalized";
    case CostTransform::exponential: return "exponential";
  }
  return "linear";
}

std::optional<CreditMode> parse_credit_mode(const std::string& text) {
  if (text == "km" || text == "hard") return CreditMode::hard;
  if (text == "ot" || text == "soft") return CreditMode::soft;
  return std::nullopt;
}

std::optional<CostTransform> parse_cost_transform(const std::string& text) {
  if (text == "linear") return CostTransform::linear;
  if (text == "normalized") return CostTransform::normalized;
  if (text == "exponential") return CostTransform::exponential;
  return std::nullopt;
}

}  // namespace turncredit

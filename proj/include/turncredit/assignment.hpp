#ifndef TURNCREDIT_ASSIGNMENT_HPP
#define TURNCREDIT_ASSIGNMENT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "turncredit/matching.hpp"

namespace turncredit {

/// One-to-one partial matching. `golden_of[i]` is the golden column matched to
/// predicted row i, or -1 when the row is unmatched.
struct HardAssignment {
  std::vector<Eigen::Index> golden_of;
  double total_weight = 0.0;

  std::size_t num_matched() const {
    return static_cast<std::size_t>(std::ranges::count_if(golden_of, [](Eigen::Index j) { return j >= 0; }));
  }
  /// Dense 0/1 witness x_ij.
  Matrix indicator(Eigen::Index cols) const;
};

template <typename Scalar>
struct BasicTransportPlan {
  MatrixX<Scalar> plan;
  VectorX<Scalar> row_marginal;
  VectorX<Scalar> col_marginal;
  Scalar temperature{};
  /// Scaling vectors in log space: plan = diag(e^log_u) exp(-C / temperature) diag(e^log_v).
  VectorX<Scalar> log_u;
  VectorX<Scalar> log_v;
  int iterations_used = 0;
  bool converged = false;
  /// max over rows and columns of |marginal sum - target|.
  Scalar marginal_violation{};
};

using TransportPlan = BasicTransportPlan<double>;

enum class CreditMode { hard, soft };
enum class CostTransform { linear, normalized, exponential };

struct CreditResult {
  Vector per_call_rewards;
  CreditMode mode = CreditMode::hard;
  double penalty = 0.0;
  std::variant<HardAssignment, TransportPlan> witness;
};

namespace detail {

/// Minimum-cost assignment of every row to a distinct column (rows <= cols),
/// shortest augmenting path with potentials. Returns the column of each row.
template <typename Scalar>
std::vector<Eigen::Index> min_cost_rows_to_cols(const MatrixX<Scalar>& cost) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (n > m) throw std::invalid_argument("min_cost_rows_to_cols: more rows than columns");
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based bookkeeping, index 0 is the virtual root
  std::vector<Scalar> u(n + 1, Scalar(0)), v(m + 1, Scalar(0));
  std::vector<Eigen::Index> row_of_col(m + 1, 0), way(m + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    Eigen::Index j0 = 0;
    std::vector<Scalar> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = row_of_col[j0];
      Scalar delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const Scalar reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> col_of_row(n, -1);
  for (Eigen::Index j = 1; j <= m; ++j)
    if (row_of_col[j] != 0) col_of_row[row_of_col[j] - 1] = j - 1;
  return col_of_row;
}

/// Maximum-weight matching on nonnegative weights, zero entries meaning "no
/// edge". Returns golden_of (-1 for unmatched) for the given row/col subsets.
template <typename Scalar>
std::pair<Scalar, std::vector<Eigen::Index>> max_weight_on(const MatrixX<Scalar>& weights,
                                                          const std::vector<Eigen::Index>& rows,
                                                          const std::vector<Eigen::Index>& cols) {
  std::vector<Eigen::Index> golden_of(rows.size(), -1);
  if (rows.empty() || cols.empty()) return {Scalar(0), golden_of};
  const MatrixX<Scalar> sub = weights(rows, cols);
  Scalar total(0);
  if (sub.rows() <= sub.cols()) {
    const auto assign = min_cost_rows_to_cols<Scalar>(-sub);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Eigen::Index c = assign[r];
      if (c >= 0 && sub(r, c) > Scalar(0)) {
        golden_of[r] = cols[c];
        total += sub(r, c);
      }
    }
  } else {
    const MatrixX<Scalar> transposed = -sub.transpose();
    const auto assign = min_cost_rows_to_cols<Scalar>(transposed);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const Eigen::Index r = assign[c];
      if (r >= 0 && sub(r, c) > Scalar(0)) {
        golden_of[r] = cols[c];
        total += sub(r, c);
      }
    }
  }
  return {total, golden_of};
}

}  // namespace detail

/// Maximum-total-weight one-to-one matching over the strictly positive entries
/// of `scores`. Among maximum-weight matchings the lexicographically smallest
/// (predicted index, golden index) assignment is returned: rows are fixed in
/// order, each taking the lowest golden column that still admits an optimal
/// completion.
template <typename Derived>
HardAssignment hungarian_match(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> weights = scores.cwiseMax(Scalar(0));
  const Eigen::Index m = weights.rows();
  const Eigen::Index n = weights.cols();

  HardAssignment out;
  out.golden_of.assign(static_cast<std::size_t>(m), -1);
  if (m == 0 || n == 0) return out;

  std::vector<Eigen::Index> rows(m), cols(n);
  for (Eigen::Index i = 0; i < m; ++i) rows[i] = i;
  for (Eigen::Index j = 0; j < n; ++j) cols[j] = j;

  auto [best, current] = detail::max_weight_on<Scalar>(weights, rows, cols);
  const Scalar tol = Scalar(1e-10) * std::max(Scalar(1), std::abs(best));
  Scalar fixed_weight(0);

  for (Eigen::Index i = 0; i < m; ++i) {
    // rows[0] is always i: earlier rows have been removed
    const Eigen::Index incumbent = current.front();
    rows.erase(rows.begin());
    Eigen::Index chosen = -1;
    for (Eigen::Index j : cols) {
      if (incumbent >= 0 && j >= incumbent) break;
      if (weights(i, j) <= Scalar(0)) continue;
      std::vector<Eigen::Index> rest_cols;
      rest_cols.reserve(cols.size());
      for (Eigen::Index c : cols)
        if (c != j) rest_cols.push_back(c);
      const Scalar value = detail::max_weight_on<Scalar>(weights, rows, rest_cols).first;
      if (std::abs(fixed_weight + weights(i, j) + value - best) <= tol) {
        chosen = j;
        break;
      }
    }
    if (chosen < 0) chosen = incumbent;
    if (chosen >= 0) {
      out.golden_of[i] = chosen;
      fixed_weight += weights(i, chosen);
      cols.erase(std::ranges::find(cols, chosen));
    }
    current = detail::max_weight_on<Scalar>(weights, rows, cols).second;
  }
  out.total_weight = static_cast<double>(fixed_weight);
  return out;
}

/// Exhaustive maximum matched weight over all injective partial maps that use
/// only strictly positive entries. Exact subset recursion over the smaller
/// side; requires min(m, n) <= 8.
template <typename Derived>
double brute_force_match(const Eigen::MatrixBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> w = scores;
  if (w.rows() < w.cols()) w.transposeInPlace();
  // rows = larger side, cols = smaller side
  const Eigen::Index small = w.cols();
  if (small > 8) throw std::invalid_argument("brute_force_match: min(m, n) must be <= 8");
  const std::size_t states = std::size_t{1} << small;
  const Scalar unreached = -std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> best(states, unreached), next(states);
  best[0] = Scalar(0);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    next = best;  // row r left unmatched
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (best[mask] == unreached) continue;
      for (Eigen::Index c = 0; c < small; ++c) {
        const std::size_t bit = std::size_t{1} << c;
        if ((mask & bit) || !(w(r, c) > Scalar(0))) continue;
        next[mask | bit] = std::max(next[mask | bit], best[mask] + w(r, c));
      }
    }
    best.swap(next);
  }
  return static_cast<double>(*std::ranges::max_element(best));
}

/// r_i = S_ij for matched rows, -penalty otherwise.
template <typename Derived>
CreditResult hard_rewards(const Eigen::MatrixBase<Derived>& scores, double penalty) {
  if (!(penalty >= 0.0)) throw std::invalid_argument("assignment.penalty must be >= 0");
  HardAssignment match = hungarian_match(scores);
  CreditResult out;
  out.mode = CreditMode::hard;
  out.penalty = penalty;
  out.per_call_rewards.resize(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const Eigen::Index j = match.golden_of[i];
    // 0.0 - penalty keeps a zero penalty at +0
    out.per_call_rewards(i) = j >= 0 ? static_cast<double>(scores(i, j)) : 0.0 - penalty;
  }
  out.witness = std::move(match);
  return out;
}

template <typename Derived>
MatrixX<typename Derived::Scalar> cost_transform(const Eigen::MatrixBase<Derived>& scores, CostTransform variant) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() == 0) throw std::invalid_argument("cost_transform: empty similarity matrix");
  switch (variant) {
    case CostTransform::linear:
      return -scores;
    case CostTransform::normalized: {
      const Scalar lo = scores.minCoeff();
      const Scalar hi = scores.maxCoeff();
      const MatrixX<Scalar> normalized = (scores.array() - lo) / (hi - lo + Scalar(1e-12));
      return (Scalar(1) - normalized.array()).matrix();
    }
    case CostTransform::exponential:
      return -scores.array().exp().matrix();
  }
  throw std::invalid_argument("cost_transform: unknown variant");
}

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(const VectorX<Scalar>& x) {
  const Scalar top = x.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((x.array() - top).exp().sum());
}

template <typename Derived>
void check_marginal(const Eigen::MatrixBase<Derived>& mass, const char* name) {
  using Scalar = typename Derived::Scalar;
  if (mass.size() == 0) throw std::invalid_argument(std::string("sinkhorn_plan: empty marginal ") + name);
  if (!(mass.array() > Scalar(0)).all())
    throw std::invalid_argument(std::string("sinkhorn_plan: marginal ") + name + " must be strictly positive");
  if (std::abs(static_cast<double>(mass.sum()) - 1.0) > 1e-9)
    throw std::invalid_argument(std::string("sinkhorn_plan: marginal ") + name + " must sum to 1");
}

}  // namespace detail

/// Entropically regularized transport plan by alternating log-domain scaling.
/// `converged` is set once the largest marginal violation drops to `tol`;
/// otherwise the last iterate is returned with converged = false.
template <typename DerivedC, typename DerivedA, typename DerivedB>
BasicTransportPlan<typename DerivedC::Scalar> sinkhorn_plan(const Eigen::MatrixBase<DerivedC>& cost,
                                                            const Eigen::MatrixBase<DerivedA>& a,
                                                            const Eigen::MatrixBase<DerivedB>& b,
                                                            typename DerivedC::Scalar temperature, int max_iter,
                                                            typename DerivedC::Scalar tol) {
  using Scalar = typename DerivedC::Scalar;
  const Eigen::Index m = cost.rows();
  const Eigen::Index n = cost.cols();
  if (a.size() != m || b.size() != n) throw std::invalid_argument("sinkhorn_plan: marginal sizes do not match cost");
  detail::check_marginal(a, "a");
  detail::check_marginal(b, "b");
  if (!(temperature > Scalar(0))) throw std::invalid_argument("assignment.temperature must be > 0");
  if (max_iter < 1) throw std::invalid_argument("assignment.max_iter must be >= 1");

  const MatrixX<Scalar> log_kernel = -cost / temperature;
  const VectorX<Scalar> log_a = a.array().log();
  const VectorX<Scalar> log_b = b.array().log();
  VectorX<Scalar> log_u = VectorX<Scalar>::Zero(m);
  VectorX<Scalar> log_v = VectorX<Scalar>::Zero(n);
  VectorX<Scalar> scratch;

  BasicTransportPlan<Scalar> out;
  out.row_marginal = a;
  out.col_marginal = b;
  out.temperature = temperature;

  for (int it = 1; it <= max_iter; ++it) {
    for (Eigen::Index i = 0; i < m; ++i) {
      scratch = log_kernel.row(i).transpose() + log_v;
      log_u(i) = log_a(i) - detail::log_sum_exp<Scalar>(scratch);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      scratch = log_kernel.col(j) + log_u;
      log_v(j) = log_b(j) - detail::log_sum_exp<Scalar>(scratch);
    }
    out.plan = (log_kernel.colwise() + log_u).rowwise() + log_v.transpose();
    out.plan = out.plan.array().exp().matrix();
    const Scalar row_err = (out.plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
    const Scalar col_err = (out.plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
    out.marginal_violation = std::max(row_err, col_err);
    out.iterations_used = it;
    if (out.marginal_violation <= tol) {
      out.converged = true;
      break;
    }
  }
  out.log_u = log_u;
  out.log_v = log_v;
  return out;
}

/// r_i = sum_j Z_ij S_ij.
template <typename Derived, typename Scalar>
CreditResult soft_rewards(const Eigen::MatrixBase<Derived>& scores, const BasicTransportPlan<Scalar>& plan) {
  if (plan.plan.rows() != scores.rows() || plan.plan.cols() != scores.cols())
    throw std::invalid_argument("soft_rewards: plan dimensions do not match the similarity matrix");
  CreditResult out;
  out.mode = CreditMode::soft;
  out.per_call_rewards = plan.plan.cwiseProduct(scores).rowwise().sum().template cast<double>();
  TransportPlan witness;
  witness.plan = plan.plan.template cast<double>();
  witness.row_marginal = plan.row_marginal.template cast<double>();
  witness.col_marginal = plan.col_marginal.template cast<double>();
  witness.temperature = static_cast<double>(plan.temperature);
  witness.log_u = plan.log_u.template cast<double>();
  witness.log_v = plan.log_v.template cast<double>();
  witness.iterations_used = plan.iterations_used;
  witness.converged = plan.converged;
  witness.marginal_violation = static_cast<double>(plan.marginal_violation);
  out.witness = std::move(witness);
  return out;
}

struct AssignmentConfig {
  CreditMode mode = CreditMode::hard;
  double penalty = 0.0;
  CostTransform cost = CostTransform::linear;
  double temperature = 0.05;
  int max_iter = 1000;
  double tol = 1e-9;
};

/// Hard or soft credit with uniform marginals. Degenerate shapes: m = 0 gives an
/// empty reward vector; n = 0 gives -penalty (hard) or 0 (soft) per call.
CreditResult assign_credit(const Matrix& scores, const AssignmentConfig& config);

const char* to_string(CreditMode mode);
const char* to_string(CostTransform transform);
std::optional<CreditMode> parse_credit_mode(const std::string& text);
std::optional<CostTransform> parse_cost_transform(const std::string& text);

}  // namespace turncredit

#endif  // TURNCREDIT_ASSIGNMENT_HPP

#ifndef TURNCREDIT_MATCHING_HPP
#define TURNCREDIT_MATCHING_HPP

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "turncredit/trace.hpp"

namespace turncredit {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

struct MatchOptions {
  /// Parameter contents compare exactly when true, ASCII case-folded otherwise.
  /// Tool and parameter names are always compared exactly.
  bool case_sensitive_content = false;
};

/// m x n pairwise scores between the predicted calls of one trajectory (rows)
/// and the golden calls (columns). Every entry lies in [0, 1].
template <typename Scalar>
struct BasicSimilarityMatrix {
  MatrixX<Scalar> scores;
  std::vector<CallPosition> row_index;

  Eigen::Index rows() const { return scores.rows(); }
  Eigen::Index cols() const { return scores.cols(); }
};

using SimilarityMatrix = BasicSimilarityMatrix<double>;

double tool_name_score(const ToolCall& pred, const ToolCall& gold);

/// Jaccard overlap of parameter-name sets; 1 when both are empty.
double param_name_jaccard(const ToolCall& pred, const ToolCall& gold);

/// Number of golden parameters whose content the prediction reproduces.
std::size_t param_content_score(const ToolCall& pred, const ToolCall& gold, const MatchOptions& options = {});

/// S = S_tn * (S_tn + S_pn + S_pc) / (2 + |N_g|).
double pair_similarity(const ToolCall& pred, const ToolCall& gold, const MatchOptions& options = {});

template <typename Scalar = double>
BasicSimilarityMatrix<Scalar> build_matrix(const std::vector<ToolCall>& predicted, const std::vector<ToolCall>& golden,
                                           const MatchOptions& options = {}) {
  const auto m = static_cast<Eigen::Index>(predicted.size());
  const auto n = static_cast<Eigen::Index>(golden.size());
  BasicSimilarityMatrix<Scalar> out;
  out.scores.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      out.scores(i, j) = static_cast<Scalar>(pair_similarity(predicted[i], golden[j], options));
  return out;
}

template <typename Scalar = double>
BasicSimilarityMatrix<Scalar> build_matrix(const Trajectory& trajectory, const GroundTruthTrace& gold,
                                           const MatchOptions& options = {}) {
  auto out = build_matrix<Scalar>(trajectory.calls(), gold.calls, options);
  out.row_index = trajectory.call_positions();
  return out;
}

}  // namespace turncredit

#endif  // TURNCREDIT_MATCHING_HPP

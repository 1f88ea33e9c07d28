#ifndef TURNCREDIT_TESTS_FIXTURES_HPP
#define TURNCREDIT_TESTS_FIXTURES_HPP

#include <random>
#include <string>
#include <vector>

#include "turncredit/engine.hpp"

namespace turncredit::testing {

inline std::string data_path(const std::string& name) { return std::string(TURNCREDIT_TEST_DATA) + "/" + name; }

/// The six-call case-study rollout and its five golden calls.
inline RolloutGroup case_study() { return parse_trace_file(data_path("case_study.jsonl")).front(); }

inline ToolCall call(std::string name, std::map<std::string, std::string> params = {}) {
  return ToolCall::make(std::move(name), std::move(params));
}

inline Turn tool_turn(std::size_t index, std::vector<ToolCall> calls) {
  Turn t;
  t.index = index;
  t.tool_calls = std::move(calls);
  return t;
}

inline Turn answer_turn(std::size_t index, std::string answer) {
  Turn t;
  t.index = index;
  t.answer = std::move(answer);
  return t;
}

/// Uniform [0, 1) matrix with roughly `sparsity` of the entries zeroed.
inline Matrix random_scores(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n, double sparsity = 0.3) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix s(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = unit(rng) < sparsity ? 0.0 : unit(rng);
  return s;
}

}  // namespace turncredit::testing

#endif  // TURNCREDIT_TESTS_FIXTURES_HPP

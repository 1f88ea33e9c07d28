#ifndef TURNCREDIT_TRACE_HPP
#define TURNCREDIT_TRACE_HPP

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace turncredit {

/// Raised for any malformed trace record. `line()` is 1-based, 0 when unknown.
class TraceError : public std::runtime_error {
 public:
  TraceError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// One predicted or golden tool invocation. Parameter contents are kept in
/// canonical string form (see canonicalize_content).
struct ToolCall {
  std::string tool_name;
  std::map<std::string, std::string> parameters;

  /// Builds a validated call; throws TraceError on an empty (trimmed) name.
  static ToolCall make(std::string name, std::map<std::string, std::string> parameters = {});

  bool operator==(const ToolCall&) const = default;
};

struct Turn {
  std::size_t index = 1;  // 1-based
  std::optional<std::string> reasoning;
  std::vector<ToolCall> tool_calls;
  std::optional<std::string> observation;
  std::optional<std::string> answer;

  bool operator==(const Turn&) const = default;
};

/// Position of a flattened call: (1-based turn index, position within turn).
struct CallPosition {
  std::size_t turn = 1;
  std::size_t slot = 0;
  bool operator==(const CallPosition&) const = default;
};

inline constexpr std::size_t kDefaultMaxTurns = 10;

class Trajectory {
 public:
  /// Validates the turn invariants and throws TraceError on violation.
  Trajectory(std::vector<Turn> turns, std::size_t max_turns = kDefaultMaxTurns);

  const std::vector<Turn>& turns() const noexcept { return turns_; }
  std::size_t num_turns() const noexcept { return turns_.size(); }
  std::size_t max_turns() const noexcept { return max_turns_; }

  /// Answer of the last turn, if it is an answer turn.
  const std::optional<std::string>& final_answer() const noexcept { return turns_.back().answer; }
  bool ends_with_answer() const noexcept { return turns_.back().answer.has_value(); }

  /// Turn-major flattened predicted-call list P and its row index.
  const std::vector<ToolCall>& calls() const noexcept { return calls_; }
  const std::vector<CallPosition>& call_positions() const noexcept { return positions_; }
  std::size_t num_calls() const noexcept { return calls_.size(); }

  bool operator==(const Trajectory& other) const { return turns_ == other.turns_; }

 private:
  std::vector<Turn> turns_;
  std::size_t max_turns_;
  std::vector<ToolCall> calls_;
  std::vector<CallPosition> positions_;
};

struct GroundTruthTrace {
  std::vector<ToolCall> calls;
  std::string golden_answer;

  bool operator==(const GroundTruthTrace&) const = default;
};

struct RolloutGroup {
  std::string query_id;
  std::vector<Trajectory> rollouts;
  GroundTruthTrace ground_truth;

  bool operator==(const RolloutGroup&) const = default;
};

/// Deterministic string form of a JSON value used for parameter-content
/// equality. Numbers lose trailing zeros and the sign of zero, objects are
/// serialized with sorted keys and no whitespace, bare strings are trimmed.
std::string canonicalize_content(const nlohmann::json& raw);

std::string trim(std::string_view s);

struct ParseOptions {
  std::size_t max_turns = kDefaultMaxTurns;
  /// Receives one message per ignored unknown field. Unset means silent.
  std::function<void(const std::string&)> warn;
};

/// Parses one JSON record into a group. `line` is used only for messages.
RolloutGroup parse_record(const nlohmann::json& record, std::size_t line = 0,
                          const ParseOptions& options = {});

/// Line-delimited records; blank lines are skipped.
std::vector<RolloutGroup> parse_trace_stream(std::istream& in, const ParseOptions& options = {});
std::vector<RolloutGroup> parse_trace_file(const std::string& path, const ParseOptions& options = {});

/// Inverse of parse_record, emitting canonical contents.
nlohmann::json to_json(const ToolCall& call);
nlohmann::json to_json(const RolloutGroup& group);

}  // namespace turncredit

#endif  // TURNCREDIT_TRACE_HPP

#include "turncredit/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>

namespace turncredit {

using nlohmann::json;

TraceError::TraceError(const std::string& what, std::size_t line)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string trim(std::string_view s) {
  constexpr std::string_view ws = " \t\n\r\f\v";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return std::string(s.substr(first, last - first + 1));
}

ToolCall ToolCall::make(std::string name, std::map<std::string, std::string> parameters) {
  if (trim(name).empty()) throw TraceError("empty tool name");
  return ToolCall{std::move(name), std::move(parameters)};
}

namespace {

std::string canonical_number(double value) {
  if (value == 0.0) return "0";
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

void serialize(const json& value, std::string& out) {
  switch (value.type()) {
    case json::value_t::object: {
      // nlohmann::json keeps object keys ordered
      out += '{';
      bool first = true;
      for (const auto& [key, item] : value.items()) {
        if (!first) out += ',';
        first = false;
        out += json(key).dump();
        out += ':';
        serialize(item, out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out += ',';
        serialize(value[i], out);
      }
      out += ']';
      break;
    }
    case json::value_t::string:
      out += value.dump();
      break;
    case json::value_t::number_integer:
      out += value.get<std::int64_t>() == 0 ? "0" : std::to_string(value.get<std::int64_t>());
      break;
    case json::value_t::number_unsigned:
      out += std::to_string(value.get<std::uint64_t>());
      break;
    case json::value_t::number_float:
      out += canonical_number(value.get<double>());
      break;
    case json::value_t::boolean:
      out += value.get<bool>() ? "true" : "false";
      break;
    default:
      out += "null";
      break;
  }
}

void warn_unknown(const json& object, std::initializer_list<std::string_view> known, std::string_view where,
                  std::size_t line, const ParseOptions& options) {
  if (!options.warn) return;
  for (const auto& [key, _] : object.items()) {
    bool found = false;
    for (auto k : known) found = found || key == k;
    if (!found) {
      options.warn("line " + std::to_string(line) + ": ignoring unknown field '" + key + "' in " +
                   std::string(where));
    }
  }
}

const json& require(const json& object, const char* key, std::size_t line) {
  auto it = object.find(key);
  if (it == object.end()) throw TraceError(std::string("missing field '") + key + "'", line);
  return *it;
}

std::string require_string(const json& object, const char* key, std::size_t line) {
  const json& v = require(object, key, line);
  if (!v.is_string()) throw TraceError(std::string("field '") + key + "' must be a string", line);
  return v.get<std::string>();
}

std::optional<std::string> optional_string(const json& object, const char* key, std::size_t line) {
  auto it = object.find(key);
  if (it == object.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw TraceError(std::string("field '") + key + "' must be a string", line);
  return it->get<std::string>();
}

ToolCall parse_call(const json& j, std::size_t line, const ParseOptions& options) {
  if (!j.is_object()) throw TraceError("tool call must be an object", line);
  warn_unknown(j, {"name", "parameters", "arguments"}, "tool call", line, options);
  std::string name = require_string(j, "name", line);
  if (trim(name).empty()) throw TraceError("empty tool name", line);

  std::map<std::string, std::string> params;
  const json* raw = nullptr;
  if (auto it = j.find("parameters"); it != j.end()) raw = &*it;
  else if (auto it2 = j.find("arguments"); it2 != j.end()) raw = &*it2;
  if (raw && !raw->is_null()) {
    if (!raw->is_object()) throw TraceError("tool call parameters must be an object", line);
    for (const auto& [key, value] : raw->items()) params.emplace(key, canonicalize_content(value));
  }
  return ToolCall{std::move(name), std::move(params)};
}

Turn parse_turn(const json& j, std::size_t position, std::size_t line, const ParseOptions& options) {
  if (!j.is_object()) throw TraceError("turn must be an object", line);
  warn_unknown(j, {"index", "reasoning", "tool_calls", "observation", "answer"}, "turn", line, options);
  Turn turn;
  turn.index = position;
  if (auto it = j.find("index"); it != j.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() > 0))
      throw TraceError("turn index must be a positive integer", line);
    turn.index = it->get<std::size_t>();
  }
  turn.reasoning = optional_string(j, "reasoning", line);
  turn.observation = optional_string(j, "observation", line);
  turn.answer = optional_string(j, "answer", line);
  if (auto it = j.find("tool_calls"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) throw TraceError("tool_calls must be an array", line);
    for (const auto& c : *it) turn.tool_calls.push_back(parse_call(c, line, options));
  }
  return turn;
}

}  // namespace

std::string canonicalize_content(const json& raw) {
  if (raw.is_string()) return trim(raw.get_ref<const std::string&>());
  std::string out;
  serialize(raw, out);
  return out;
}

Trajectory::Trajectory(std::vector<Turn> turns, std::size_t max_turns)
    : turns_(std::move(turns)), max_turns_(max_turns) {
  if (max_turns_ < 1) throw TraceError("max_turns must be at least 1");
  if (turns_.empty()) throw TraceError("trajectory has no turns");
  if (turns_.size() > max_turns_)
    throw TraceError("trajectory has " + std::to_string(turns_.size()) + " turns, limit is " +
                     std::to_string(max_turns_));
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < turns_.size(); ++k) {
    const Turn& t = turns_[k];
    if (!seen.insert(t.index).second) throw TraceError("duplicate turn index " + std::to_string(t.index));
    if (t.index != k + 1)
      throw TraceError("turn indices must be consecutive from 1, got " + std::to_string(t.index) +
                       " at position " + std::to_string(k + 1));
    if (t.answer && !t.tool_calls.empty())
      throw TraceError("answer turn " + std::to_string(t.index) + " contains tool calls");
    if (t.answer && k + 1 != turns_.size())
      throw TraceError("only the last turn may carry an answer (turn " + std::to_string(t.index) + ")");
    for (std::size_t s = 0; s < t.tool_calls.size(); ++s) {
      if (trim(t.tool_calls[s].tool_name).empty()) throw TraceError("empty tool name");
      calls_.push_back(t.tool_calls[s]);
      positions_.push_back({t.index, s});
    }
  }
}

RolloutGroup parse_record(const json& record, std::size_t line, const ParseOptions& options) {
  if (!record.is_object()) throw TraceError("record must be a JSON object", line);
  warn_unknown(record, {"query_id", "ground_truth", "rollouts"}, "record", line, options);

  RolloutGroup group;
  group.query_id = require_string(record, "query_id", line);

  const json& gt = require(record, "ground_truth", line);
  if (!gt.is_object()) throw TraceError("ground_truth must be an object", line);
  warn_unknown(gt, {"calls", "answer"}, "ground_truth", line, options);
  if (auto it = gt.find("calls"); it != gt.end() && !it->is_null()) {
    if (!it->is_array()) throw TraceError("ground_truth.calls must be an array", line);
    for (const auto& c : *it) group.ground_truth.calls.push_back(parse_call(c, line, options));
  }
  group.ground_truth.golden_answer = optional_string(gt, "answer", line).value_or("");

  const json& rollouts = require(record, "rollouts", line);
  if (!rollouts.is_array()) throw TraceError("rollouts must be an array", line);
  for (const auto& r : rollouts) {
    if (!r.is_object()) throw TraceError("rollout must be an object", line);
    warn_unknown(r, {"turns"}, "rollout", line, options);
    const json& turns_json = require(r, "turns", line);
    if (!turns_json.is_array()) throw TraceError("turns must be an array", line);
    std::vector<Turn> turns;
    for (std::size_t k = 0; k < turns_json.size(); ++k)
      turns.push_back(parse_turn(turns_json[k], k + 1, line, options));
    try {
      group.rollouts.emplace_back(std::move(turns), options.max_turns);
    } catch (const TraceError& e) {
      throw TraceError(e.what(), line);
    }
  }
  return group;
}

std::vector<RolloutGroup> parse_trace_stream(std::istream& in, const ParseOptions& options) {
  std::vector<RolloutGroup> groups;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw TraceError(std::string("malformed JSON: ") + e.what(), line);
    }
    groups.push_back(parse_record(record, line, options));
  }
  return groups;
}

std::vector<RolloutGroup> parse_trace_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file '" + path + "'");
  return parse_trace_stream(in, options);
}

json to_json(const ToolCall& call) {
  json params = json::object();
  for (const auto& [k, v] : call.parameters) params[k] = v;
  return {{"name", call.tool_name}, {"parameters", std::move(params)}};
}

json to_json(const RolloutGroup& group) {
  json calls = json::array();
  for (const auto& c : group.ground_truth.calls) calls.push_back(to_json(c));
  json rollouts = json::array();
  for (const auto& traj : group.rollouts) {
    json turns = json::array();
    for (const auto& t : traj.turns()) {
      json tj;
      if (t.reasoning) tj["reasoning"] = *t.reasoning;
      tj["tool_calls"] = json::array();
      for (const auto& c : t.tool_calls) tj["tool_calls"].push_back(to_json(c));
      if (t.observation) tj["observation"] = *t.observation;
      if (t.answer) tj["answer"] = *t.answer;
      turns.push_back(std::move(tj));
    }
    rollouts.push_back({{"turns", std::move(turns)}});
  }
  return {{"query_id", group.query_id},
          {"ground_truth", {{"calls", std::move(calls)}, {"answer", group.ground_truth.golden_answer}}},
          {"rollouts", std::move(rollouts)}};
}

}  // namespace turncredit

#include "turncredit/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>

namespace turncredit {

namespace {

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a number, got '" + value + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  long long out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected an integer, got '" + value + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

template <typename T>
T require(const std::string& key, const std::string& value, std::optional<T> parsed) {
  if (!parsed) throw ConfigError(key + ": unknown value '" + value + "'");
  return *parsed;
}

}  // namespace

void EngineConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "assignment.mode") assignment.mode = require(key, value, parse_credit_mode(value));
  else if (key == "assignment.penalty") assignment.penalty = to_double(key, value);
  else if (key == "assignment.cost_transform") assignment.cost = require(key, value, parse_cost_transform(value));
  else if (key == "assignment.temperature") assignment.temperature = to_double(key, value);
  else if (key == "assignment.max_iter") assignment.max_iter = static_cast<int>(to_integer(key, value));
  else if (key == "assignment.tol") assignment.tol = to_double(key, value);
  else if (key == "assignment.strict") strict = to_bool(key, value);
  else if (key == "matching.case_sensitive_content") matching.case_sensitive_content = to_bool(key, value);
  else if (key == "reward.scheme") reward_scheme = require(key, value, parse_reward_scheme(value));
  else if (key == "advantage.gamma") advantage.gamma = to_double(key, value);
  else if (key == "advantage.guard") advantage.guard = to_double(key, value);
  else if (key == "advantage.variant") advantage.variant = require(key, value, parse_advantage_variant(value));
  else if (key == "advantage.wp_scale") advantage.weighted_product_scale = to_double(key, value);
  else if (key == "advantage.clip_range") clip_range = to_double(key, value);
  else if (key == "advantage.kl_coeff") kl_coeff = to_double(key, value);
  else if (key == "trace.max_turns") {
    const long long turns = to_integer(key, value);
    if (turns < 1) throw ConfigError("trace.max_turns must be >= 1");
    max_turns = static_cast<std::size_t>(turns);
  } else if (key == "output.format") {
    if (value == "json-lines" || value == "jsonl") format = OutputFormat::json_lines;
    else if (value == "table") format = OutputFormat::table;
    else throw ConfigError(key + ": unknown value '" + value + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void EngineConfig::load(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void EngineConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  load(in);
}

void EngineConfig::validate() const {
  if (!(assignment.penalty >= 0.0)) throw ConfigError("assignment.penalty must be >= 0");
  if (!(assignment.temperature > 0.0)) throw ConfigError("assignment.temperature must be > 0");
  if (assignment.max_iter < 1) throw ConfigError("assignment.max_iter must be >= 1");
  if (!(assignment.tol > 0.0)) throw ConfigError("assignment.tol must be > 0");
  if (!(advantage.gamma >= 0.0 && advantage.gamma <= 1.0)) throw ConfigError("advantage.gamma out of range");
  if (!(advantage.guard >= 0.0)) throw ConfigError("advantage.guard must be >= 0");
  if (!(clip_range > 0.0 && clip_range < 1.0)) throw ConfigError("advantage.clip_range must lie in (0, 1)");
  if (!(kl_coeff >= 0.0)) throw ConfigError("advantage.kl_coeff must be >= 0");
  if (max_turns < 1) throw ConfigError("trace.max_turns must be >= 1");
}

}  // namespace turncredit

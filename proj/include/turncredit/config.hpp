#ifndef TURNCREDIT_CONFIG_HPP
#define TURNCREDIT_CONFIG_HPP

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "turncredit/advantage.hpp"
#include "turncredit/assignment.hpp"
#include "turncredit/matching.hpp"
#include "turncredit/reward.hpp"

namespace turncredit {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class OutputFormat { json_lines, table };

struct EngineConfig {
  AssignmentConfig assignment;
  /// Exit with a numerical error when a transport plan fails to converge.
  bool strict = false;
  MatchOptions matching;
  RewardScheme reward_scheme = RewardScheme::integrated;
  AdvantageConfig advantage;
  double clip_range = 0.2;
  double kl_coeff = 0.001;
  std::size_t max_turns = kDefaultMaxTurns;
  OutputFormat format = OutputFormat::json_lines;

  /// Sets one dotted key, e.g. "assignment.mode" = "ot". Throws ConfigError for
  /// unknown keys or unparsable values; range checks happen in validate().
  void set(const std::string& key, const std::string& value);

  /// Reads `key = value` lines. '#' starts a comment; blank lines are skipped.
  void load(std::istream& in);
  void load_file(const std::string& path);

  void validate() const;
};

}  // namespace turncredit

#endif  // TURNCREDIT_CONFIG_HPP

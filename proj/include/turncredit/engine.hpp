#ifndef TURNCREDIT_ENGINE_HPP
#define TURNCREDIT_ENGINE_HPP

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "turncredit/advantage.hpp"
#include "turncredit/assignment.hpp"
#include "turncredit/config.hpp"
#include "turncredit/matching.hpp"
#include "turncredit/reward.hpp"
#include "turncredit/trace.hpp"

namespace turncredit {

inline constexpr const char* kVersion = "0.1.0";

/// A transport plan missed its tolerance while EngineConfig::strict is set.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RolloutScore {
  SimilarityMatrix similarity;
  CreditResult credit;
  RewardSchedule schedule;
};

struct GroupScore {
  std::string query_id;
  std::vector<RolloutScore> rollouts;
  std::optional<AdvantageTable> advantages;
};

/// Matching, credit and reward schedule for every rollout; advantages too when
/// requested. Throws GroupTooSmall when the advantage variant needs G >= 2.
GroupScore score_group(const RolloutGroup& group, const EngineConfig& config, bool with_advantages);

/// Scores groups on a worker pool and returns results in input order. The
/// first failure in input order is rethrown.
std::vector<GroupScore> score_groups(const std::vector<RolloutGroup>& groups, const EngineConfig& config,
                                     bool with_advantages);

/// Keyed by (query_id, rollout_index).
using LayoutMap = std::map<std::pair<std::string, std::size_t>, TokenAdvantageLayout>;

/// Line-delimited {query_id, rollout_index, num_tokens, turn_spans, masked_spans}.
LayoutMap parse_layout_stream(std::istream& in);
LayoutMap parse_layout_file(const std::string& path);

using Record = nlohmann::ordered_json;

std::vector<Record> match_records(const GroupScore& group);
std::vector<Record> reward_records(const GroupScore& group);
/// Adds a per-token block to rollouts that have an entry in `layouts`.
std::vector<Record> advantage_records(const GroupScore& group, const LayoutMap* layouts = nullptr);

/// Human-readable rendering of the same records.
void write_match_table(std::ostream& out, const GroupScore& group);
void write_reward_table(std::ostream& out, const GroupScore& group);
void write_advantage_table(std::ostream& out, const GroupScore& group);

/// Whitespace-separated rows: rollout_index logprob_new logprob_old
/// logprob_ref advantage mask. '#' lines are comments.
struct ObjectiveFile {
  ObjectiveInputs inputs;
  std::vector<Vector> advantages;
  std::vector<std::vector<bool>> masks;
};

ObjectiveFile parse_objective_stream(std::istream& in, double clip_range, double kl_coeff);

}  // namespace turncredit

#endif  // TURNCREDIT_ENGINE_HPP

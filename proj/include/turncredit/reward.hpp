#ifndef TURNCREDIT_REWARD_HPP
#define TURNCREDIT_REWARD_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "turncredit/assignment.hpp"
#include "turncredit/trace.hpp"

namespace turncredit {

/// integrated: tool-call turns carry their matched credit and the answer turn
/// carries the outcome F1. outcome_only: tool-call turns are zeroed.
/// turn_level: the answer turn is zeroed (outcome is still reported).
enum class RewardScheme { integrated, outcome_only, turn_level };

struct RewardSchedule {
  Vector per_turn;
  double outcome = 0.0;
  double trajectory_total = 0.0;
  CreditMode mode = CreditMode::hard;
};

/// Mean per-call credit of each turn. Zero-call turns (including the answer
/// turn) get 0.
Vector turn_rewards(const Trajectory& trajectory, const CreditResult& credit);

/// Lowercased, ASCII punctuation removed, split on whitespace.
std::vector<std::string> answer_tokens(std::string_view text);

/// Multiset token F1. Both empty gives 1, exactly one empty gives 0.
double outcome_f1(std::string_view predicted, std::string_view golden);

RewardSchedule assemble_schedule(const Trajectory& trajectory, const CreditResult& credit,
                                 const GroundTruthTrace& gold, RewardScheme scheme = RewardScheme::integrated);

const char* to_string(RewardScheme scheme);
std::optional<RewardScheme> parse_reward_scheme(const std::string& text);

}  // namespace turncredit

#endif  // TURNCREDIT_REWARD_HPP

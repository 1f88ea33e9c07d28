#include "turncredit/reward.hpp"

#include <cctype>
#include <map>
#include <stdexcept>

namespace turncredit {

Vector turn_rewards(const Trajectory& trajectory, const CreditResult& credit) {
  const auto& positions = trajectory.call_positions();
  if (static_cast<std::size_t>(credit.per_call_rewards.size()) != positions.size())
    throw std::invalid_argument("turn_rewards: " + std::to_string(credit.per_call_rewards.size()) +
                                " call rewards for " + std::to_string(positions.size()) + " predicted calls");
  const auto turns = static_cast<Eigen::Index>(trajectory.num_turns());
  Vector sum = Vector::Zero(turns);
  Vector count = Vector::Zero(turns);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const auto t = static_cast<Eigen::Index>(positions[k].turn - 1);
    sum(t) += credit.per_call_rewards(static_cast<Eigen::Index>(k));
    count(t) += 1.0;
  }
  return (count.array() > 0.0).select(sum.array() / count.array().max(1.0), 0.0).matrix();
}

std::vector<std::string> answer_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (!std::ispunct(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double outcome_f1(std::string_view predicted, std::string_view golden) {
  const auto pred = answer_tokens(predicted);
  const auto gold = answer_tokens(golden);
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : gold) ++counts[t];
  std::size_t common = 0;
  for (const auto& t : pred) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(pred.size() + gold.size());
}

RewardSchedule assemble_schedule(const Trajectory& trajectory, const CreditResult& credit,
                                 const GroundTruthTrace& gold, RewardScheme scheme) {
  RewardSchedule out;
  out.mode = credit.mode;
  out.per_turn = turn_rewards(trajectory, credit);
  if (scheme == RewardScheme::outcome_only) out.per_turn.setZero();
  if (trajectory.ends_with_answer()) {
    out.outcome = outcome_f1(*trajectory.final_answer(), gold.golden_answer);
    out.per_turn(out.per_turn.size() - 1) = scheme == RewardScheme::turn_level ? 0.0 : out.outcome;
  }
  out.trajectory_total = out.per_turn.sum();
  return out;
}

const char* to_string(RewardScheme scheme) {
  switch (scheme) {
    case RewardScheme::integrated: return "integrated";
    case RewardScheme::outcome_only: return "outcome_only";
    case RewardScheme::turn_level: return "turn_level";
  }
  return "integrated";
}

std::optional<RewardScheme> parse_reward_scheme(const std::string& text) {
  if (text == "integrated") return RewardScheme::integrated;
  if (text == "outcome_only") return RewardScheme::outcome_only;
  if (text == "turn_level") return RewardScheme::turn_level;
  return std::nullopt;
}

}  // namespace turncredit

#include "turncredit/advantage.hpp"

namespace turncredit {

const char* to_string(AdvantageVariant variant) {
  switch (variant) {
    case AdvantageVariant::dual: return "dual";
    case AdvantageVariant::weighted_product: return "weighted_product";
    case AdvantageVariant::weighted_sum: return "weighted_sum";
    case AdvantageVariant::trajectory_only: return "trajectory_only";
    case AdvantageVariant::turn_only: return "turn_only";
  }
  return "dual";
}

std::optional<AdvantageVariant> parse_advantage_variant(const std::string& text) {
  for (auto v : {AdvantageVariant::dual, AdvantageVariant::weighted_product, AdvantageVariant::weighted_sum,
                 AdvantageVariant::trajectory_only, AdvantageVariant::turn_only})
    if (text == to_string(v)) return v;
  return std::nullopt;
}

AdvantageTable compute_advantages(const Ragged& per_turn_rewards, const AdvantageConfig& config) {
  const std::size_t group = per_turn_rewards.size();
  if (group == 0) throw GroupTooSmall("empty rollout group");

  AdvantageTable table;
  table.group_size = group;
  table.gamma = config.gamma;
  for (const auto& r : per_turn_rewards) table.discounted_returns.push_back(discounted_returns(r, config.gamma));

  if (config.variant == AdvantageVariant::turn_only) {
    table.trajectory_adv = Vector::Zero(static_cast<Eigen::Index>(group));
  } else {
    Vector totals(static_cast<Eigen::Index>(group));
    for (std::size_t i = 0; i < group; ++i) totals(static_cast<Eigen::Index>(i)) = per_turn_rewards[i].sum();
    table.trajectory_adv = trajectory_advantage(totals, config.guard);
  }

  switch (config.variant) {
    case AdvantageVariant::dual:
    case AdvantageVariant::turn_only:
      table.turn_adv = turn_advantage(table.discounted_returns, config.guard);
      table.integrated = integrate(table.trajectory_adv, table.turn_adv);
      break;
    case AdvantageVariant::trajectory_only:
      for (const auto& r : per_turn_rewards) table.turn_adv.push_back(Vector::Zero(r.size()));
      table.integrated = integrate(table.trajectory_adv, table.turn_adv);
      break;
    case AdvantageVariant::weighted_product:
    case AdvantageVariant::weighted_sum: {
      const auto intra = config.variant == AdvantageVariant::weighted_product ? IntraVariant::weighted_product
                                                                               : IntraVariant::weighted_sum;
      for (std::size_t i = 0; i < group; ++i) {
        Vector local;
        table.integrated.push_back(intra_trajectory_advantage(table.discounted_returns[i],
                                                              table.trajectory_adv(static_cast<Eigen::Index>(i)),
                                                              intra, config.guard, config.weighted_product_scale,
                                                              &local));
        table.turn_adv.push_back(std::move(local));
      }
      break;
    }
  }
  return table;
}

TokenAdvantages broadcast_tokens(const Vector& integrated, const TokenAdvantageLayout& layout) {
  const std::size_t tokens = layout.num_tokens();
  if (static_cast<std::size_t>(integrated.size()) != layout.turn_spans.size())
    throw std::invalid_argument("broadcast_tokens: " + std::to_string(layout.turn_spans.size()) +
                                " turn spans for " + std::to_string(integrated.size()) + " turns");
  TokenAdvantages out;
  out.advantage = Vector::Zero(static_cast<Eigen::Index>(tokens));
  out.mask.assign(tokens, false);
  std::size_t previous_end = 0;
  for (std::size_t t = 0; t < layout.turn_spans.size(); ++t) {
    const TokenSpan span = layout.turn_spans[t];
    if (span.begin > span.end) throw std::invalid_argument("broadcast_tokens: span with begin > end");
    if (span.end > tokens) throw std::invalid_argument("broadcast_tokens: span beyond sequence length");
    if (span.begin < previous_end) throw std::invalid_argument("broadcast_tokens: overlapping or unordered spans");
    previous_end = span.end;
    for (std::size_t k = span.begin; k < span.end; ++k) {
      if (!layout.loss_mask[k]) continue;
      out.mask[k] = true;
      out.advantage(static_cast<Eigen::Index>(k)) = integrated(static_cast<Eigen::Index>(t));
    }
  }
  return out;
}

double grpo_objective(const ObjectiveInputs& inputs, const std::vector<Vector>& per_token_adv,
                      const std::vector<std::vector<bool>>& loss_mask) {
  const std::size_t group = per_token_adv.size();
  if (inputs.logprob_new.size() != group || inputs.logprob_old.size() != group ||
      inputs.logprob_ref.size() != group || loss_mask.size() != group)
    throw std::invalid_argument("grpo_objective: rollout counts differ between inputs");
  if (group == 0) throw std::invalid_argument("grpo_objective: no rollouts");
  if (!(inputs.clip_range > 0.0 && inputs.clip_range < 1.0))
    throw std::invalid_argument("grpo_objective: clip_range must lie in (0, 1)");
  if (!(inputs.kl_coeff >= 0.0)) throw std::invalid_argument("grpo_objective: kl_coeff must be >= 0");

  double total = 0.0;
  for (std::size_t i = 0; i < group; ++i) {
    const auto len = per_token_adv[i].size();
    if (inputs.logprob_new[i].size() != len || inputs.logprob_old[i].size() != len ||
        inputs.logprob_ref[i].size() != len || loss_mask[i].size() != static_cast<std::size_t>(len))
      throw std::invalid_argument("grpo_objective: token lengths differ in rollout " + std::to_string(i));
    double sum = 0.0;
    std::size_t counted = 0;
    for (Eigen::Index k = 0; k < len; ++k) {
      const double lp_new = inputs.logprob_new[i](k);
      const double lp_old = inputs.logprob_old[i](k);
      const double lp_ref = inputs.logprob_ref[i](k);
      const double adv = per_token_adv[i](k);
      if (!std::isfinite(lp_new) || !std::isfinite(lp_old) || !std::isfinite(lp_ref) || !std::isfinite(adv))
        throw std::invalid_argument("grpo_objective: non-finite input in rollout " + std::to_string(i));
      if (!loss_mask[i][static_cast<std::size_t>(k)]) continue;
      const double ratio = std::exp(lp_new - lp_old);
      sum += clipped_surrogate(ratio, adv, inputs.clip_range) - inputs.kl_coeff * kl_estimate(lp_new, lp_ref);
      ++counted;
    }
    if (counted) total += sum / static_cast<double>(counted);
  }
  return total / static_cast<double>(group);
}

}  // namespace turncredit

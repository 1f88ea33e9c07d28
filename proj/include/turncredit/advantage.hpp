#ifndef TURNCREDIT_ADVANTAGE_HPP
#define TURNCREDIT_ADVANTAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "turncredit/matching.hpp"

namespace turncredit {

/// Per-rollout sequences of differing lengths, e.g. one entry per turn.
template <typename Scalar>
using RaggedX = std::vector<VectorX<Scalar>>;
using Ragged = RaggedX<double>;

inline constexpr double kDefaultGuard = 1e-6;
inline constexpr double kDefaultGamma = 0.9;

class GroupTooSmall : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

/// Population mean and standard deviation. A constant sample returns its value
/// and 0 exactly; the rounded sum would otherwise leave a residue that the
/// guard amplifies into a spurious advantage.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> mean_std(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.minCoeff() == x.maxCoeff()) return {x(0), Scalar(0)};
  const Scalar mean = x.mean();
  const Scalar var = (x.array() - mean).square().mean();
  return {mean, std::sqrt(var)};
}

}  // namespace detail

/// A_i = (R_i - mean) / (std + guard) over the group, population std.
template <typename Derived>
VectorX<typename Derived::Scalar> trajectory_advantage(const Eigen::MatrixBase<Derived>& totals,
                                                       typename Derived::Scalar guard = kDefaultGuard) {
  if (totals.size() < 2)
    throw GroupTooSmall("trajectory advantage needs a group of at least 2 rollouts, got " +
                        std::to_string(totals.size()));
  const auto [mean, std] = detail::mean_std(totals);
  return (totals.array() - mean) / (std + guard);
}

/// R_t = sum_{k >= t} gamma^(k - t) r_k, evaluated as R_t = r_t + gamma R_{t+1}.
template <typename Derived>
VectorX<typename Derived::Scalar> discounted_returns(const Eigen::MatrixBase<Derived>& per_turn,
                                                     typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  if (!(gamma >= Scalar(0) && gamma <= Scalar(1))) throw std::invalid_argument("advantage.gamma out of range");
  VectorX<Scalar> out(per_turn.size());
  Scalar running(0);
  for (Eigen::Index t = per_turn.size() - 1; t >= 0; --t) {
    running = per_turn(t) + gamma * running;
    out(t) = running;
  }
  return out;
}

/// Group-normalized return at each turn position, over the rollouts that reach
/// that position. A position reached by a single rollout is normalized with
/// mean 0 and std 1, i.e. left as is.
template <typename Scalar>
RaggedX<Scalar> turn_advantage(const RaggedX<Scalar>& group_returns, Scalar guard = Scalar(kDefaultGuard)) {
  if (group_returns.empty()) throw GroupTooSmall("turn advantage needs at least one rollout");
  Eigen::Index horizon = 0;
  for (const auto& r : group_returns) horizon = std::max(horizon, r.size());

  RaggedX<Scalar> out;
  out.reserve(group_returns.size());
  for (const auto& r : group_returns) out.emplace_back(r.size());

  std::vector<Scalar> column;
  for (Eigen::Index t = 0; t < horizon; ++t) {
    column.clear();
    for (const auto& r : group_returns)
      if (r.size() > t) column.push_back(r(t));
    if (column.size() == 1) {
      for (std::size_t i = 0; i < group_returns.size(); ++i)
        if (group_returns[i].size() > t) out[i](t) = group_returns[i](t);
      continue;
    }
    const Eigen::Map<const VectorX<Scalar>> reached(column.data(), static_cast<Eigen::Index>(column.size()));
    const auto [mean, std] = detail::mean_std(reached);
    for (std::size_t i = 0; i < group_returns.size(); ++i)
      if (group_returns[i].size() > t) out[i](t) = (group_returns[i](t) - mean) / (std + guard);
  }
  return out;
}

/// A~_{i,t} = A^g_i + A^l_{i,t}.
template <typename Derived, typename Scalar>
RaggedX<Scalar> integrate(const Eigen::MatrixBase<Derived>& trajectory_adv, const RaggedX<Scalar>& turn_adv) {
  if (static_cast<std::size_t>(trajectory_adv.size()) != turn_adv.size())
    throw std::invalid_argument("integrate: " + std::to_string(trajectory_adv.size()) +
                                " trajectory advantages for " + std::to_string(turn_adv.size()) + " rollouts");
  RaggedX<Scalar> out;
  out.reserve(turn_adv.size());
  for (std::size_t i = 0; i < turn_adv.size(); ++i)
    out.push_back((turn_adv[i].array() + trajectory_adv(static_cast<Eigen::Index>(i))).matrix());
  return out;
}

enum class IntraVariant { weighted_product, weighted_sum };

/// Advantages normalized within one rollout, treating its turns as the sample:
///   local_t = (R_t - mean_t R) / (std_t R + guard)
///   weighted_product: (1 + scale * sgn(A_g) * local_t) * A_g
///   weighted_sum:     A_g + local_t
/// `local` receives local_t when non-null.
template <typename Derived>
VectorX<typename Derived::Scalar> intra_trajectory_advantage(const Eigen::MatrixBase<Derived>& returns,
                                                             typename Derived::Scalar trajectory_adv,
                                                             IntraVariant variant,
                                                             typename Derived::Scalar guard = kDefaultGuard,
                                                             typename Derived::Scalar scale = 0.1,
                                                             VectorX<typename Derived::Scalar>* local = nullptr) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> loc = VectorX<Scalar>::Zero(returns.size());
  if (returns.size() > 0) {
    const auto [mean, std] = detail::mean_std(returns);
    loc = (returns.array() - mean) / (std + guard);
  }
  if (local) *local = loc;
  if (variant == IntraVariant::weighted_sum) return (loc.array() + trajectory_adv).matrix();
  const Scalar sign = Scalar((trajectory_adv > Scalar(0)) - (trajectory_adv < Scalar(0)));
  return ((Scalar(1) + scale * sign * loc.array()) * trajectory_adv).matrix();
}

enum class AdvantageVariant { dual, weighted_product, weighted_sum, trajectory_only, turn_only };

const char* to_string(AdvantageVariant variant);
std::optional<AdvantageVariant> parse_advantage_variant(const std::string& text);

struct AdvantageConfig {
  AdvantageVariant variant = AdvantageVariant::dual;
  double gamma = kDefaultGamma;
  double guard = kDefaultGuard;
  double weighted_product_scale = 0.1;
};

struct AdvantageTable {
  std::size_t group_size = 0;
  Vector trajectory_adv;
  Ragged turn_adv;
  Ragged integrated;
  Ragged discounted_returns;
  double gamma = kDefaultGamma;
};

/// Full group pipeline from per-turn reward sequences. Every variant except
/// turn_only needs at least two rollouts.
AdvantageTable compute_advantages(const Ragged& per_turn_rewards, const AdvantageConfig& config = {});

/// Half-open [begin, end) token range.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const TokenSpan&) const = default;
};

/// Token geometry of one rollout: one span per turn over generated tokens and
/// a per-token loss mask that is false on tool-response tokens.
struct TokenAdvantageLayout {
  std::vector<TokenSpan> turn_spans;
  std::vector<bool> loss_mask;

  std::size_t num_tokens() const { return loss_mask.size(); }
};

struct TokenAdvantages {
  Vector advantage;
  /// Effective mask: layout mask and inside some turn span.
  std::vector<bool> mask;
};

/// Piecewise-constant token advantages; masked tokens and tokens outside every
/// span carry 0.
TokenAdvantages broadcast_tokens(const Vector& integrated, const TokenAdvantageLayout& layout);

struct ObjectiveInputs {
  std::vector<Vector> logprob_new;
  std::vector<Vector> logprob_old;
  std::vector<Vector> logprob_ref;
  double clip_range = 0.2;
  double kl_coeff = 0.001;
};

/// exp(d) - d - 1 with d = logprob_ref - logprob_new.
inline double kl_estimate(double logprob_new, double logprob_ref) {
  const double d = logprob_ref - logprob_new;
  return std::expm1(d) - d;
}

/// Per-token clipped surrogate min(w A, clip(w, 1 - eps, 1 + eps) A).
inline double clipped_surrogate(double ratio, double advantage, double clip_range) {
  const double clipped = std::clamp(ratio, 1.0 - clip_range, 1.0 + clip_range);
  return std::min(ratio * advantage, clipped * advantage);
}

/// Mean over rollouts of the per-rollout average, over unmasked tokens, of
/// the clipped surrogate minus kl_coeff times the KL estimate. A rollout with
/// no unmasked tokens contributes 0.
double grpo_objective(const ObjectiveInputs& inputs, const std::vector<Vector>& per_token_adv,
                      const std::vector<std::vector<bool>>& loss_mask);

}  // namespace turncredit

#endif  // TURNCREDIT_ADVANTAGE_HPP

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check is computed against an independent oracle or a value
// fixed by hand; nothing here reads the engine's own output as ground truth.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"

using namespace turncredit;
using namespace turncredit::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int failures = 0;

void run(int id, const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (seconds >= budget_seconds) {
    if (out.pass) out.detail = "too slow";
    out.pass = false;
  }
  if (!out.pass) ++failures;
  std::printf("%s %d %s (%.3fs / %.0fs)%s%s\n", out.pass ? "PASS" : "FAIL", id, name, seconds, budget_seconds,
              out.detail.empty() ? "" : ": ", out.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

/// Weight of the best permutation other than the optimum, by enumeration.
double runner_up_weight(const Matrix& s, double best) {
  std::vector<int> perm(static_cast<std::size_t>(s.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double runner_up = -1.0;
  do {
    double w = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) w += s(static_cast<Eigen::Index>(i), perm[i]);
    if (w < best - 1e-15) runner_up = std::max(runner_up, w);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return runner_up;
}

std::string dump_lines(const std::vector<Record>& records) {
  std::string out;
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

Outcome golden_km() {
  Outcome out;
  const RolloutGroup group = case_study();
  const GroupScore score = score_group(group, EngineConfig{}, false);
  const RolloutScore& r = score.rollouts.at(0);
  const std::vector<double> expected = {0, 1, 1, 1, 1, 1};
  std::vector<double> got(r.credit.per_call_rewards.data(),
                          r.credit.per_call_rewards.data() + r.credit.per_call_rewards.size());
  out.require(got == expected, "per-call rewards differ");
  out.require(r.schedule.outcome == 1.0, "outcome " + fmt(r.schedule.outcome));
  return out;
}

Outcome golden_ot() {
  Outcome out;
  EngineConfig config;
  config.assignment.mode = CreditMode::soft;
  config.assignment.temperature = 0.05;
  const GroupScore score = score_group(case_study(), config, false);
  const RolloutScore& r = score.rollouts.at(0);
  const auto& plan = std::get<TransportPlan>(r.credit.witness);
  const Matrix& z = plan.plan;
  out.require(z.rows() == 6 && z.cols() == 5, "plan shape");
  out.require((z.rowwise().sum().array() - 1.0 / 6.0).abs().maxCoeff() <= 1e-6, "row sums");
  out.require((z.colwise().sum().array() - 1.0 / 5.0).abs().maxCoeff() <= 1e-6, "column sums");

  const Vector& per_turn = r.schedule.per_turn;
  for (int t : {2, 4, 5, 6})
    out.require(per_turn(t - 1) >= 0.160 && per_turn(t - 1) <= 0.1667,
                "turn " + std::to_string(t) + " = " + fmt(per_turn(t - 1)));
  const double r1 = per_turn(0);
  const double r3 = per_turn(2);
  out.require(r1 > 0.0 && r1 < 0.05, "turn 1 = " + fmt(r1));
  out.require(r3 > 0.14 && r3 < 0.1667, "turn 3 = " + fmt(r3));
  out.require(r1 < r3, "turn 1 >= turn 3");
  // landmark_locator is golden call 1; predicted calls 1 and 3 are rows 0 and 2
  const double landmark = z(0, 1) + z(2, 1);
  out.require(std::abs(landmark - 0.2) <= 1e-3, "landmark mass " + fmt(landmark));
  if (out.pass) out.detail = "turn1=" + fmt(r1) + " turn3=" + fmt(r3) + " others=" + fmt(per_turn(1));
  return out;
}

Outcome hungarian_oracle() {
  Outcome out;
  std::mt19937_64 rng(20240501);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = dim(rng);
    const int n = dim(rng);
    Matrix s(m, n);
    // a third of the instances use coarse levels so ties and zeros are common
    const bool coarse = trial % 3 == 0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) s(i, j) = coarse ? level(rng) / 4.0 : unit(rng);
    const double fast = hungarian_match(s).total_weight;
    const double slow = brute_force_match(s);
    worst = std::max(worst, std::abs(fast - slow));
    out.require(std::abs(fast - slow) <= 1e-9, "instance " + std::to_string(trial) + ": " + fmt(fast) + " vs " +
                                                   fmt(slow));
  }
  if (out.pass) out.detail = "max |diff| = " + fmt(worst);
  return out;
}

Outcome cold_limit() {
  Outcome out;
  constexpr double temperature = 1e-3;
  // Mixing the optimum with a competitor that differs on a k-cycle costs
  // gap/n and gains entropy on 2k entries, so the entropic plan puts a
  // fraction exp(-gap / (k T)) of each affected row on the competitor. An
  // optimum is resolvable at this temperature when that fraction is at most
  // 1%, i.e. gap >= n T ln(100).
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(2, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int accepted = 0;
  int rejected = 0;
  double worst = 0.0;
  while (accepted < 200) {
    const int n = dim(rng);
    Matrix s(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s(i, j) = unit(rng);
    const HardAssignment best = hungarian_match(s);
    const double gap = best.total_weight - runner_up_weight(s, best.total_weight);
    if (gap < n * temperature * std::log(100.0)) {
      ++rejected;
      continue;
    }
    ++accepted;
    const Vector u = Vector::Constant(n, 1.0 / n);
    const AssignmentConfig defaults;
    const TransportPlan plan =
        sinkhorn_plan(cost_transform(s, CostTransform::linear), u, u, temperature, defaults.max_iter, defaults.tol);
    const double err = (plan.plan - best.indicator(n) / n).cwiseAbs().maxCoeff();
    worst = std::max(worst, err);
    out.require(err <= 1e-2, "n=" + std::to_string(n) + " gap=" + fmt(gap) + " err=" + fmt(err));
  }
  if (out.pass)
    out.detail = "max err = " + fmt(worst) + ", " + std::to_string(rejected) + " unresolvable draws skipped";
  return out;
}

Ragged random_schedules(std::mt19937_64& rng, int group) {
  std::uniform_int_distribution<int> len(1, 7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Ragged out;
  for (int i = 0; i < group; ++i) {
    Vector r(len(rng));
    for (Eigen::Index t = 0; t < r.size(); ++t) r(t) = unit(rng) < 0.3 ? 0.0 : unit(rng);
    out.push_back(r);
  }
  return out;
}

Outcome advantage_identities() {
  Outcome out;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> group_size(2, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vector totals(group_size(rng));
    for (Eigen::Index i = 0; i < totals.size(); ++i) totals(i) = 10.0 * unit(rng);
    out.require(std::abs(trajectory_advantage(totals).sum()) <= 1e-9, "sum of A_g not zero");
  }

  for (double value : {0.0, 1.0, 3.7}) {
    const Ragged equal(5, Vector::Constant(4, value));
    for (AdvantageVariant v : {AdvantageVariant::dual, AdvantageVariant::trajectory_only,
                               AdvantageVariant::turn_only}) {
      AdvantageConfig config;
      config.variant = v;
      const AdvantageTable table = compute_advantages(equal, config);
      out.require(table.trajectory_adv.isZero(0.0), "equal group: nonzero A_g");
      for (const auto& a : table.integrated) out.require(a.isZero(0.0), "equal group: nonzero advantage");
      for (const auto& a : table.turn_adv) out.require(a.isZero(0.0), "equal group: nonzero A_l");
    }
  }

  std::uniform_real_distribution<double> gammas(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Vector r = random_schedules(rng, 1).front();
    const double gamma = trial % 10 == 0 ? (trial % 20 == 0 ? 0.0 : 1.0) : gammas(rng);
    const Vector big_r = discounted_returns(r, gamma);
    const Eigen::Index t_max = r.size() - 1;
    out.require(big_r(t_max) == r(t_max), "last return");
    for (Eigen::Index t = 0; t < t_max; ++t)
      out.require(std::abs(big_r(t) - (r(t) + gamma * big_r(t + 1))) <= 1e-12, "recursion broken");
  }

  // only rollout 2 reaches turns 3 and 4
  Ragged group = {Vector::Constant(2, 0.5), Vector::Constant(1, 0.2), Vector(4)};
  group[2] << 0.1, 0.3, 0.7, 0.9;
  const AdvantageTable table = compute_advantages(group);
  const Vector& returns = table.discounted_returns[2];
  out.require(table.turn_adv[2](2) == returns(2), "fallback at turn 3");
  out.require(table.turn_adv[2](3) == returns(3), "fallback at turn 4");
  out.require(returns(3) == 0.9 && std::abs(returns(2) - (0.7 + 0.9 * 0.9)) <= 1e-15, "returns");
  return out;
}

Outcome grpo_sanity() {
  Outcome out;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> rollouts(1, 6), tokens(0, 12), coin(0, 3);
  std::uniform_real_distribution<double> logp(-5.0, 0.0), adv(-3.0, 3.0);
  for (int trial = 0; trial < 300; ++trial) {
    ObjectiveInputs in;
    in.kl_coeff = 0.0;
    std::vector<Vector> advantages;
    std::vector<std::vector<bool>> masks;
    const int g = rollouts(rng);
    double oracle = 0.0;
    for (int i = 0; i < g; ++i) {
      const int len = tokens(rng);
      Vector lp(len), a(len);
      std::vector<bool> mask(static_cast<std::size_t>(len));
      double sum = 0.0;
      int live = 0;
      for (int k = 0; k < len; ++k) {
        lp(k) = logp(rng);
        a(k) = adv(rng);
        mask[static_cast<std::size_t>(k)] = coin(rng) != 0;
        if (mask[static_cast<std::size_t>(k)]) {
          sum += a(k);
          ++live;
        }
      }
      oracle += live > 0 ? sum / live : 0.0;
      in.logprob_new.push_back(lp);
      in.logprob_old.push_back(lp);
      in.logprob_ref.push_back(lp);
      advantages.push_back(a);
      masks.push_back(mask);
    }
    oracle /= g;
    const double value = grpo_objective(in, advantages, masks);
    out.require(std::abs(value - oracle) <= 1e-12, "objective " + fmt(value) + " vs " + fmt(oracle));
  }

  out.require(clipped_surrogate(1.3, 1.0, 0.2) == 1.2, "clipped surrogate");
  ObjectiveInputs one;
  one.clip_range = 0.2;
  one.kl_coeff = 0.0;
  one.logprob_old = {Vector::Constant(1, -1.0)};
  one.logprob_new = {Vector::Constant(1, -1.0 + std::log(1.3))};
  one.logprob_ref = one.logprob_new;
  const double clipped = grpo_objective(one, {Vector::Ones(1)}, {{true}});
  out.require(clipped == 1.2, "single-token objective " + fmt(clipped));
  return out;
}

Outcome outcome_f1_cases() {
  Outcome out;
  out.require(outcome_f1("Stone.", "Stone") == 1.0, "Stone.");
  out.require(std::abs(outcome_f1("the stone", "stone") - 0.6667) <= 1e-4, "the stone");
  out.require(outcome_f1("granite", "stone") == 0.0, "disjoint");
  out.require(outcome_f1("red clay", "blue marble") == 0.0, "disjoint pair");
  return out;
}

Outcome ablation_matrix() {
  Outcome out;
  const std::vector<RolloutGroup> groups = parse_trace_file(data_path("ablation.jsonl"));
  out.require(groups.size() == 3, "expected 3 groups");
  std::set<std::string> cells;
  std::set<std::string> advantage_only;
  for (CreditMode mode : {CreditMode::hard, CreditMode::soft})
    for (AdvantageVariant variant :
         {AdvantageVariant::trajectory_only, AdvantageVariant::turn_only, AdvantageVariant::dual})
      for (RewardScheme scheme : {RewardScheme::outcome_only, RewardScheme::integrated}) {
        EngineConfig config;
        config.assignment.mode = mode;
        config.advantage.variant = variant;
        config.reward_scheme = scheme;
        config.validate();
        // a cell's output is everything the engine emits for it: the credit
        // stream followed by the advantage stream
        std::string first, second, advantages;
        for (const RolloutGroup& group : groups) {
          const GroupScore score = score_group(group, config, true);
          first += dump_lines(match_records(score));
          advantages += dump_lines(advantage_records(score));
        }
        first += advantages;
        for (const GroupScore& score : score_groups(groups, config, true))
          second += dump_lines(match_records(score));
        for (const GroupScore& score : score_groups(groups, config, true))
          second += dump_lines(advantage_records(score));
        const std::string label = std::string(to_string(mode)) + "/" + to_string(variant) + "/" + to_string(scheme);
        out.require(first == second, label + " is not deterministic");
        out.require(cells.insert(first).second, label + " duplicates another cell");
        advantage_only.insert(advantages);
      }
  if (out.pass)
    out.detail = std::to_string(cells.size()) + "/12 distinct; advantage stream alone " +
                 std::to_string(advantage_only.size()) + "/12 (outcome_only ignores per-call credit)";
  return out;
}

/// Per-turn reward of `turn` (1-based) after hard matching with penalty lambda.
double hard_turn_reward(const Trajectory& traj, const GroundTruthTrace& gold, std::size_t turn, double lambda) {
  AssignmentConfig config;
  config.penalty = lambda;
  const CreditResult credit = assign_credit(build_matrix(traj, gold).scores, config);
  return turn_rewards(traj, credit)(static_cast<Eigen::Index>(turn - 1));
}

Outcome anti_hacking() {
  Outcome out;
  const std::vector<ToolCall> gold_calls = {call("search", {{"q", "tallest mountain in Japan"}}),
                                            call("elevation", {{"peak", "Mount Fuji"}, {"unit", "m"}}),
                                            call("convert", {{"value", "3776"}, {"to", "ft"}})};
  const GroundTruthTrace gold{gold_calls, "12388 ft"};
  const std::vector<Turn> turns = {tool_turn(1, {call("search", {{"q", "tallest mountain in Japan"}})}),
                                   tool_turn(2, {call("elevation", {{"peak", "Mount Fuji"}, {"unit", "km"}})}),
                                   tool_turn(3, {call("convert", {{"value", "3776"}, {"to", "ft"}})}),
                                   answer_turn(4, "12388 ft")};
  const Trajectory base(turns);

  int cases = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<Turn> copy = turns;
    copy[t].tool_calls.push_back(copy[t].tool_calls.front());
    const Trajectory dup(copy);
    for (double lambda : {0.05, 0.3, 1.0}) {
      const double before = hard_turn_reward(base, gold, t + 1, lambda);
      const double after = hard_turn_reward(dup, gold, t + 1, lambda);
      out.require(after < before, "turn " + std::to_string(t + 1) + " lambda " + fmt(lambda) + ": " + fmt(before) +
                                      " -> " + fmt(after));
      ++cases;
    }
    const double before = hard_turn_reward(base, gold, t + 1, 0.0);
    const double after = hard_turn_reward(dup, gold, t + 1, 0.0);
    out.require(after <= before, "turn " + std::to_string(t + 1) + " lambda 0: " + fmt(before) + " -> " + fmt(after));
    ++cases;
  }

  // the same on the case-study rollout, duplicating each matched call in place
  const RolloutGroup study = case_study();
  const Trajectory& traj = study.rollouts.front();
  for (std::size_t t = 2; t <= 6; ++t) {
    std::vector<Turn> copy = traj.turns();
    copy[t - 1].tool_calls.push_back(copy[t - 1].tool_calls.front());
    const Trajectory dup(copy);
    out.require(hard_turn_reward(dup, study.ground_truth, t, 0.2) < hard_turn_reward(traj, study.ground_truth, t, 0.2),
                "case study turn " + std::to_string(t));
    out.require(hard_turn_reward(dup, study.ground_truth, t, 0.0) <= hard_turn_reward(traj, study.ground_truth, t, 0.0),
                "case study turn " + std::to_string(t) + " lambda 0");
    cases += 2;
  }
  if (out.pass) out.detail = std::to_string(cases) + " duplications";
  return out;
}

}  // namespace

int main() {
  run(1, "golden KM fixture", 1.0, golden_km);
  run(2, "golden OT fixture", 1.0, golden_ot);
  run(3, "Hungarian oracle equivalence", 10.0, hungarian_oracle);
  run(4, "cold-limit OT", 30.0, cold_limit);
  run(5, "advantage identities", 5.0, advantage_identities);
  run(6, "GRPO objective sanity", 5.0, grpo_sanity);
  run(7, "outcome F1", 1.0, outcome_f1_cases);
  run(8, "ablation reachability", 30.0, ablation_matrix);
  run(9, "anti-hacking duplication", 5.0, anti_hacking);
  std::printf("%s: %d failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}

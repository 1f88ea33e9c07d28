#include "turncredit/engine.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>
#include <variant>

namespace turncredit {

using nlohmann::json;

namespace {

// -0.0 prints as "-0.0"; normalize so equal values serialize identically
double clean(double x) { return x + 0.0; }

Record numbers(const Vector& v) {
  Record out = Record::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(clean(v(i)));
  return out;
}

Record numbers(const Matrix& m) {
  Record out = Record::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(numbers(Vector(m.row(i).transpose())));
  return out;
}

std::string fixed(double x, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << clean(x);
  return os.str();
}

}  // namespace

GroupScore score_group(const RolloutGroup& group, const EngineConfig& config, bool with_advantages) {
  GroupScore out;
  out.query_id = group.query_id;
  out.rollouts.reserve(group.rollouts.size());
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    const Trajectory& trajectory = group.rollouts[r];
    RolloutScore score;
    score.similarity = build_matrix(trajectory, group.ground_truth, config.matching);
    score.credit = assign_credit(score.similarity.scores, config.assignment);
    if (config.strict) {
      if (const auto* plan = std::get_if<TransportPlan>(&score.credit.witness); plan && !plan->converged) {
        throw NonConvergence("query " + group.query_id + " rollout " + std::to_string(r) +
                             ": transport plan did not converge (violation " +
                             std::to_string(plan->marginal_violation) + " after " +
                             std::to_string(plan->iterations_used) + " iterations)");
      }
    }
    score.schedule = assemble_schedule(trajectory, score.credit, group.ground_truth, config.reward_scheme);
    out.rollouts.push_back(std::move(score));
  }
  if (with_advantages) {
    Ragged per_turn;
    for (const auto& s : out.rollouts) per_turn.push_back(s.schedule.per_turn);
    if (per_turn.empty()) return out;
    try {
      out.advantages = compute_advantages(per_turn, config.advantage);
    } catch (const GroupTooSmall& e) {
      throw GroupTooSmall("query " + group.query_id + ": " + e.what());
    }
  }
  return out;
}

std::vector<GroupScore> score_groups(const std::vector<RolloutGroup>& groups, const EngineConfig& config,
                                     bool with_advantages) {
  std::vector<GroupScore> results(groups.size());
  std::vector<std::exception_ptr> errors(groups.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < groups.size(); k = next++) {
      try {
        results[k] = score_group(groups[k], config, with_advantages);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers =
      std::min<std::size_t>(groups.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

LayoutMap parse_layout_stream(std::istream& in) {
  LayoutMap out;
  std::string text;
  std::size_t line = 0;
  auto spans = [&](const json& j, const char* key) {
    std::vector<TokenSpan> result;
    auto it = j.find(key);
    if (it == j.end()) return result;
    if (!it->is_array()) throw TraceError(std::string(key) + " must be an array", line);
    for (const auto& s : *it) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_unsigned() || !s[1].is_number_unsigned())
        throw TraceError(std::string(key) + " entries must be [begin, end] pairs of non-negative integers", line);
      result.push_back({s[0].get<std::size_t>(), s[1].get<std::size_t>()});
    }
    return result;
  };
  while (std::getline(in, text)) {
    ++line;
    if (trim(text).empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw TraceError(std::string("malformed layout JSON: ") + e.what(), line);
    }
    if (!j.is_object() || !j.contains("query_id") || !j.contains("rollout_index") || !j.contains("num_tokens"))
      throw TraceError("layout record needs query_id, rollout_index and num_tokens", line);
    if (!j["query_id"].is_string() || !j["rollout_index"].is_number_unsigned() || !j["num_tokens"].is_number_unsigned())
      throw TraceError("layout record has mistyped query_id, rollout_index or num_tokens", line);
    TokenAdvantageLayout layout;
    layout.turn_spans = spans(j, "turn_spans");
    layout.loss_mask.assign(j["num_tokens"].get<std::size_t>(), true);
    for (const TokenSpan& s : spans(j, "masked_spans")) {
      if (s.begin > s.end || s.end > layout.loss_mask.size())
        throw TraceError("masked span beyond sequence length", line);
      std::fill(layout.loss_mask.begin() + static_cast<std::ptrdiff_t>(s.begin),
                layout.loss_mask.begin() + static_cast<std::ptrdiff_t>(s.end), false);
    }
    auto key = std::make_pair(j["query_id"].get<std::string>(), j["rollout_index"].get<std::size_t>());
    if (!out.emplace(key, std::move(layout)).second)
      throw TraceError("duplicate layout for query " + key.first + " rollout " + std::to_string(key.second), line);
  }
  return out;
}

LayoutMap parse_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open layout file '" + path + "'");
  return parse_layout_stream(in);
}

std::vector<Record> match_records(const GroupScore& group) {
  std::vector<Record> out;
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    const RolloutScore& s = group.rollouts[r];
    Record rec;
    rec["query_id"] = group.query_id;
    rec["rollout_index"] = r;
    rec["mode"] = to_string(s.credit.mode);
    Record rows = Record::array();
    for (const auto& p : s.similarity.row_index) rows.push_back({p.turn, p.slot});
    rec["row_index"] = std::move(rows);
    rec["similarity"] = numbers(s.similarity.scores);
    if (const auto* hard = std::get_if<HardAssignment>(&s.credit.witness)) {
      Record matching = Record::array();
      for (Eigen::Index j : hard->golden_of) matching.push_back(j >= 0 ? Record(j) : Record(nullptr));
      rec["matching"] = std::move(matching);
      rec["matched_weight"] = clean(hard->total_weight);
    } else {
      const auto& plan = std::get<TransportPlan>(s.credit.witness);
      rec["plan"] = numbers(plan.plan);
      rec["converged"] = plan.converged;
      rec["iterations"] = plan.iterations_used;
    }
    rec["per_call_rewards"] = numbers(s.credit.per_call_rewards);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Record> reward_records(const GroupScore& group) {
  std::vector<Record> out;
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    const RewardSchedule& s = group.rollouts[r].schedule;
    Record rec;
    rec["query_id"] = group.query_id;
    rec["rollout_index"] = r;
    rec["per_turn"] = numbers(s.per_turn);
    rec["outcome"] = clean(s.outcome);
    rec["total"] = clean(s.trajectory_total);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<Record> advantage_records(const GroupScore& group, const LayoutMap* layouts) {
  std::vector<Record> out;
  if (!group.advantages) return out;
  const AdvantageTable& table = *group.advantages;
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const Vector& rewards = group.rollouts[r].schedule.per_turn;
    Record rec;
    rec["query_id"] = group.query_id;
    rec["rollout_index"] = r;
    rec["A_g"] = clean(table.trajectory_adv(i));
    Record turns = Record::array();
    for (Eigen::Index t = 0; t < rewards.size(); ++t) {
      Record row;
      row["t"] = t + 1;
      row["r_t"] = clean(rewards(t));
      row["R_t"] = clean(table.discounted_returns[r](t));
      row["A_l"] = clean(table.turn_adv[r](t));
      row["A_tilde"] = clean(table.integrated[r](t));
      turns.push_back(std::move(row));
    }
    rec["per_turn"] = std::move(turns);
    if (layouts) {
      auto it = layouts->find({group.query_id, r});
      if (it != layouts->end()) {
        TokenAdvantages tokens;
        try {
          tokens = broadcast_tokens(table.integrated[r], it->second);
        } catch (const std::invalid_argument& e) {
          throw std::invalid_argument("query " + group.query_id + " rollout " + std::to_string(r) +
                                      ": layout does not fit trace: " + e.what());
        }
        rec["token_advantage"] = numbers(tokens.advantage);
        Record mask = Record::array();
        for (bool b : tokens.mask) mask.push_back(b ? 1 : 0);
        rec["loss_mask"] = std::move(mask);
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_match_table(std::ostream& out, const GroupScore& group) {
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    const RolloutScore& s = group.rollouts[r];
    out << "query " << group.query_id << "  rollout " << r << "  mode " << to_string(s.credit.mode) << "\n";
    const auto* hard = std::get_if<HardAssignment>(&s.credit.witness);
    const auto* plan = std::get_if<TransportPlan>(&s.credit.witness);
    for (Eigen::Index i = 0; i < s.similarity.rows(); ++i) {
      const CallPosition& p = s.similarity.row_index[static_cast<std::size_t>(i)];
      out << "  turn " << std::setw(2) << p.turn << "." << p.slot << "  S:";
      for (Eigen::Index j = 0; j < s.similarity.cols(); ++j) out << " " << fixed(s.similarity.scores(i, j));
      if (hard) {
        const Eigen::Index j = hard->golden_of[static_cast<std::size_t>(i)];
        out << "  -> " << (j >= 0 ? "golden " + std::to_string(j) : std::string("unmatched"));
      } else if (plan) {
        out << "  Z:";
        for (Eigen::Index j = 0; j < plan->plan.cols(); ++j) out << " " << fixed(plan->plan(i, j));
      }
      out << "  reward " << fixed(s.credit.per_call_rewards(i)) << "\n";
    }
  }
}

void write_reward_table(std::ostream& out, const GroupScore& group) {
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    const RewardSchedule& s = group.rollouts[r].schedule;
    out << "query " << group.query_id << "  rollout " << r << "  outcome " << fixed(s.outcome) << "  total "
        << fixed(s.trajectory_total) << "\n   r_t:";
    for (Eigen::Index t = 0; t < s.per_turn.size(); ++t) out << " " << fixed(s.per_turn(t));
    out << "\n";
  }
}

void write_advantage_table(std::ostream& out, const GroupScore& group) {
  if (!group.advantages) return;
  const AdvantageTable& table = *group.advantages;
  for (std::size_t r = 0; r < group.rollouts.size(); ++r) {
    out << "query " << group.query_id << "  rollout " << r << "  A_g "
        << fixed(table.trajectory_adv(static_cast<Eigen::Index>(r))) << "\n";
    out << "     t       r_t       R_t       A_l   A_tilde\n";
    const Vector& rewards = group.rollouts[r].schedule.per_turn;
    for (Eigen::Index t = 0; t < rewards.size(); ++t) {
      out << std::setw(6) << t + 1 << std::setw(10) << fixed(rewards(t)) << std::setw(10)
          << fixed(table.discounted_returns[r](t)) << std::setw(10) << fixed(table.turn_adv[r](t)) << std::setw(10)
          << fixed(table.integrated[r](t)) << "\n";
    }
  }
}

ObjectiveFile parse_objective_stream(std::istream& in, double clip_range, double kl_coeff) {
  std::map<std::size_t, std::vector<std::array<double, 5>>> rows;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
    if (trim(text).empty()) continue;
    std::istringstream fields(text);
    long long rollout = -1;
    std::array<double, 5> v{};
    if (!(fields >> rollout >> v[0] >> v[1] >> v[2] >> v[3] >> v[4]) || rollout < 0)
      throw TraceError("objective row needs: rollout_index logprob_new logprob_old logprob_ref advantage mask", line);
    std::string extra;
    if (fields >> extra) throw TraceError("trailing data in objective row", line);
    rows[static_cast<std::size_t>(rollout)].push_back(v);
  }
  ObjectiveFile out;
  out.inputs.clip_range = clip_range;
  out.inputs.kl_coeff = kl_coeff;
  std::size_t expected = 0;
  for (const auto& [rollout, tokens] : rows) {
    if (rollout != expected++) throw TraceError("objective rollout indices must be contiguous from 0");
    const auto n = static_cast<Eigen::Index>(tokens.size());
    Vector lp_new(n), lp_old(n), lp_ref(n), adv(n);
    std::vector<bool> mask(tokens.size());
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& v = tokens[static_cast<std::size_t>(k)];
      lp_new(k) = v[0];
      lp_old(k) = v[1];
      lp_ref(k) = v[2];
      adv(k) = v[3];
      mask[static_cast<std::size_t>(k)] = v[4] != 0.0;
    }
    out.inputs.logprob_new.push_back(std::move(lp_new));
    out.inputs.logprob_old.push_back(std::move(lp_old));
    out.inputs.logprob_ref.push_back(std::move(lp_ref));
    out.advantages.push_back(std::move(adv));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

}  // namespace turncredit

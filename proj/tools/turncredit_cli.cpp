// turncredit: turn-level credit assignment and group-relative advantages for
// multi-turn tool-call traces.
//
// Exit codes: 0 success, 1 validation or config error, 2 input parse error,
// 3 transport non-convergence under --strict.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "turncredit/engine.hpp"

namespace {

using namespace turncredit;

enum ExitCode { kOk = 0, kConfigError = 1, kParseError = 2, kNumericalError = 3 };

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string trace_path;
  std::string layout_path;
  std::string objective_path;
};

EngineConfig resolve_config(const Options& opts, const CLI::App& app) {
  EngineConfig config;
  if (!opts.config_path.empty()) {
    config.load_file(opts.config_path);
  } else if (const char* env = std::getenv("ENGINE_CONFIG"); env && *env) {
    config.load_file(env);
  }
  for (const std::string& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  // dedicated flags win over --set and the config file
  auto flag = [&](const char* name, const char* key) {
    const auto* option = app.get_option_no_throw(name);
    if (option && option->count() > 0) config.set(key, option->as<std::string>());
  };
  flag("--mode", "assignment.mode");
  flag("--penalty", "assignment.penalty");
  flag("--cost-transform", "assignment.cost_transform");
  flag("--temperature", "assignment.temperature");
  flag("--max-iter", "assignment.max_iter");
  flag("--tol", "assignment.tol");
  flag("--scheme", "reward.scheme");
  flag("--gamma", "advantage.gamma");
  flag("--variant", "advantage.variant");
  flag("--max-turns", "trace.max_turns");
  flag("--format", "output.format");
  flag("--clip-range", "advantage.clip_range");
  flag("--kl-coeff", "advantage.kl_coeff");
  if (app.get_option_no_throw("--strict") && app.get_option_no_throw("--strict")->count() > 0) config.strict = true;
  config.validate();
  return config;
}

void add_engine_flags(CLI::App& cmd, Options& opts) {
  cmd.add_option("trace", opts.trace_path, "Line-delimited trace file")->required();
  cmd.add_option("--mode", "Credit assignment: km | ot");
  cmd.add_option("--penalty", "Penalty for unmatched calls (km)");
  cmd.add_option("--cost-transform", "linear | normalized | exponential (ot)");
  cmd.add_option("--temperature", "Entropic regularization strength (ot)");
  cmd.add_option("--max-iter", "Sinkhorn iteration budget");
  cmd.add_option("--tol", "Sinkhorn marginal tolerance");
  cmd.add_option("--scheme", "Reward scheme: integrated | outcome_only | turn_level");
  cmd.add_option("--max-turns", "Maximum turns per trajectory");
  cmd.add_option("--format", "json-lines | table");
  cmd.add_flag("--strict", "Fail when a transport plan does not converge");
}

int run(int argc, char** argv) {
  CLI::App app{"Turn-level credit assignment for tool-call traces"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Options opts;
  app.add_option("-c,--config", opts.config_path, "key = value config file (default: $ENGINE_CONFIG)");
  app.add_option("--set", opts.overrides, "Override a config key, key=value (repeatable)");

  auto* match = app.add_subcommand("match", "Similarity matrix, assignment and per-call rewards");
  add_engine_flags(*match, opts);
  auto* reward = app.add_subcommand("reward", "Per-turn reward schedules");
  add_engine_flags(*reward, opts);
  reward->add_option("--gamma", "Accepted for config symmetry; unused");
  auto* advantage = app.add_subcommand("advantage", "Trajectory, turn and integrated advantages");
  add_engine_flags(*advantage, opts);
  advantage->add_option("--gamma", "Discount factor");
  advantage->add_option("--variant", "dual | weighted_product | weighted_sum | trajectory_only | turn_only");
  advantage->add_option("--layout", opts.layout_path, "Token layout file for per-token output");
  auto* objective = app.add_subcommand("objective", "Clipped surrogate objective from per-token log-probabilities");
  objective->add_option("input", opts.objective_path, "Rows: rollout logprob_new logprob_old logprob_ref adv mask")
      ->required();
  objective->add_option("--clip-range", "Ratio clip epsilon");
  objective->add_option("--kl-coeff", "KL penalty coefficient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  CLI::App* active = app.get_subcommands().front();
  EngineConfig config;
  try {
    config = resolve_config(opts, *active);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  if (active == objective) {
    ObjectiveFile file;
    try {
      std::ifstream in(opts.objective_path);
      if (!in) throw TraceError("cannot open '" + opts.objective_path + "'");
      file = parse_objective_stream(in, config.clip_range, config.kl_coeff);
    } catch (const TraceError& e) {
      std::cerr << "parse error: " << e.what() << "\n";
      return kParseError;
    }
    try {
      const double value = grpo_objective(file.inputs, file.advantages, file.masks);
      std::cout << nlohmann::json(value).dump() << "\n";
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfigError;
    }
    return kOk;
  }

  std::vector<RolloutGroup> groups;
  LayoutMap layouts;
  try {
    ParseOptions parse;
    parse.max_turns = config.max_turns;
    parse.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
    groups = parse_trace_file(opts.trace_path, parse);
    if (!opts.layout_path.empty()) layouts = parse_layout_file(opts.layout_path);
  } catch (const TraceError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParseError;
  }

  const bool with_advantages = active == advantage;
  std::vector<GroupScore> scores;
  try {
    scores = score_groups(groups, config, with_advantages);
  } catch (const NonConvergence& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    const bool table = config.format == OutputFormat::table;
    for (const GroupScore& group : scores) {
      if (active == match) {
        if (table) write_match_table(std::cout, group);
        else for (const auto& rec : match_records(group)) std::cout << rec.dump() << "\n";
      } else if (active == reward) {
        if (table) write_reward_table(std::cout, group);
        else for (const auto& rec : reward_records(group)) std::cout << rec.dump() << "\n";
      } else {
        if (table) write_advantage_table(std::cout, group);
        else
          for (const auto& rec : advantage_records(group, opts.layout_path.empty() ? nullptr : &layouts))
            std::cout << rec.dump() << "\n";
      }
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }

#pragma once

// Training and evaluation harness: acting through the planner, collecting
// transitions, learning between episodes, persistence and metrics.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "dsn/breakout.hpp"
#include "dsn/learner.hpp"
#include "dsn/planner.hpp"
#include "dsn/schema.hpp"

namespace dsn {

struct RunConfig {
  BreakoutConfig env;
  int window = 7;
  int horizon = 20;
  std::size_t cap = ParameterSet::kDefaultCap;
  int episodes = 25;              // training episodes, or evaluation episodes per seed
  std::vector<std::uint64_t> seeds{0};
  int warmup_episodes = 1;        // forced random play at the start of training
  bool replan_every_step = true;  // otherwise only on divergence or an exhausted plan
  bool prefer_constrained = true; // look past rewards that need no action
  bool avoid_negative_reward = true; // rank plans that predict a drop last
  bool search_fallback = true;       // rollout search when backtracing finds no clean plan
  bool require_escape = true;        // clean plans must leave a drop-free continuation
  bool break_loops = true;           // random action on a frame pair already seen this episode
  double explore_epsilon = 0.0;      // random-action rate in training episodes
  LearnOptions learn;
  PlannerOptions planner;
  std::string params_path = "params.dsn";
  std::string metrics_path = "metrics.csv";

  /// Throws ConfigError on an invalid combination.
  void validate() const;
  EnvSpec env_spec() const { return env.env_spec(window); }
};

/// key = value lines; '#' starts a comment. Unknown keys are errors.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value);

struct EpisodeRecord {
  int episode = 0;
  std::uint64_t seed = 0;
  int total_reward = 0;
  int steps = 0;
  int bricks = 0;
  int lives_lost = 0;
  int plans_ok = 0;
  int plans_tried = 0;
  std::vector<std::size_t> schemas;  // per matrix, canonical tag order
};

struct TrainingResult {
  std::vector<EpisodeRecord> records;
  ParameterSet params;
  EpochReport last_report;
};

using Progress = std::function<void(const EpisodeRecord&, const std::string& detail)>;
/// Called after every learning epoch, for instrumentation.
using EpochHook = std::function<void(const ReplayBuffer&, const Learner&, const ParameterSet&, const EpochReport&)>;

/// Training on seeds.front(); the environment seed of episode k is seed + k.
TrainingResult run_training(const RunConfig& cfg, const Progress& progress = {}, const EpochHook& hook = {});
/// Evaluation without learning: cfg.episodes episodes for each seed.
std::vector<EpisodeRecord> run_eval(const RunConfig& cfg, const ParameterSet& params, int num_balls,
                                    const Progress& progress = {});

/// Plays one episode; with a buffer, its unique transitions are inserted.
/// `render` receives the ASCII frame after every step.
EpisodeRecord play_episode(const RunConfig& cfg, const BreakoutConfig& env_cfg, const ParameterSet& params,
                           std::uint64_t env_seed, std::uint64_t policy_seed, bool explore_only,
                           ReplayBuffer* buffer = nullptr,
                           const std::function<void(const std::string&)>& render = {},
                           double explore_epsilon = 0.0);

void save_params(const ParameterSet& params, const EnvSpec& spec, std::ostream& os);
void save_params(const ParameterSet& params, const EnvSpec& spec, const std::string& path);
/// Throws ConfigError naming the mismatching field when the header does not
/// match `spec`.
ParameterSet load_params(std::istream& is, const EnvSpec& spec, std::size_t cap = ParameterSet::kDefaultCap);
ParameterSet load_params(const std::string& path, const EnvSpec& spec, std::size_t cap = ParameterSet::kDefaultCap);

void emit_metrics(const std::vector<EpisodeRecord>& records, std::ostream& os);
void emit_metrics(const std::vector<EpisodeRecord>& records, const std::string& path);

double mean_reward(const std::vector<EpisodeRecord>& records);

}  // namespace dsn

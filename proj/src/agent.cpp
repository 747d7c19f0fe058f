#include "dsn/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "dsn/errors.hpp"
#include "dsn/forward_model.hpp"

namespace dsn {

namespace {

std::string trim(const std::string& s)
{
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v)
{
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  return x;
}

double to_double(const std::string& key, const std::string& v)
{
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v)
{
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v)
{
  std::vector<std::uint64_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    long long x = to_int(key, item);
    if (x < 0) throw ConfigError("config key '" + key + "': seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(x));
  }
  return out;
}

}  // namespace

void RunConfig::validate() const
{
  env.validate();
  env.env_spec(window);
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (cap < 1) throw ConfigError("cap must be >= 1");
  if (episodes < 0) throw ConfigError("episodes must be >= 0");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (warmup_episodes < 0) throw ConfigError("warmup_episodes must be >= 0");
  if (!(explore_epsilon >= 0.0 && explore_epsilon <= 1.0)) throw ConfigError("explore_epsilon must lie in [0, 1]");
}

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& v)
{
  auto i = [&] { return static_cast<int>(to_int(key, v)); };
  if (key == "env.width") c.env.width = i();
  else if (key == "env.height") c.env.height = i();
  else if (key == "env.brick_row_first") c.env.brick_row_first = i();
  else if (key == "env.brick_row_last") c.env.brick_row_last = i();
  else if (key == "env.brick_col_first") c.env.brick_col_first = i();
  else if (key == "env.brick_col_last") c.env.brick_col_last = i();
  else if (key == "env.paddle_width") c.env.paddle_width = i();
  else if (key == "env.lives") c.env.lives = i();
  else if (key == "env.max_steps") c.env.max_steps = i();
  else if (key == "env.num_balls") c.env.num_balls = i();
  else if (key == "window") c.window = i();
  else if (key == "horizon") c.horizon = i();
  else if (key == "cap") c.cap = static_cast<std::size_t>(to_int(key, v));
  else if (key == "episodes") c.episodes = i();
  else if (key == "seeds") c.seeds = to_seeds(key, v);
  else if (key == "warmup_episodes") c.warmup_episodes = i();
  else if (key == "replan_every_step") c.replan_every_step = to_bool(key, v);
  else if (key == "prefer_constrained") c.prefer_constrained = to_bool(key, v);
  else if (key == "avoid_negative_reward") c.avoid_negative_reward = to_bool(key, v);
  else if (key == "require_escape") c.require_escape = to_bool(key, v);
  else if (key == "break_loops") c.break_loops = to_bool(key, v);
  else if (key == "explore_epsilon") c.explore_epsilon = to_double(key, v);
  else if (key == "search_fallback") c.search_fallback = to_bool(key, v);
  else if (key == "planner.escape_budget") c.planner.escape_budget = static_cast<std::size_t>(to_int(key, v));
  else if (key == "planner.max_escape_checks") c.planner.max_escape_checks = i();
  else if (key == "planner.search_budget") c.planner.search_budget = static_cast<std::size_t>(to_int(key, v));
  else if (key == "learn.generalize_trials") c.learn.generalize_trials = i();
  else if (key == "learn.random_seed") c.learn.random_seed = to_bool(key, v);
  else if (key == "learn.seed") c.learn.seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "planner.max_negotiation_depth") c.planner.max_negotiation_depth = i();
  else if (key == "planner.visit_budget") c.planner.visit_budget = static_cast<std::size_t>(to_int(key, v));
  else if (key == "planner.rollback_failed_schemas") c.planner.rollback_failed_schemas = to_bool(key, v);
  else if (key == "planner.validate") c.planner.validate = to_bool(key, v);
  else if (key == "params_path") c.params_path = v;
  else if (key == "metrics_path") c.metrics_path = v;
  else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(std::istream& is)
{
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path)
{
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(f);
}

EpisodeRecord play_episode(const RunConfig& cfg, const BreakoutConfig& env_cfg, const ParameterSet& params,
                           std::uint64_t env_seed, std::uint64_t policy_seed, bool explore_only,
                           ReplayBuffer* buffer, const std::function<void(const std::string&)>& render,
                           double explore_epsilon)
{
  Breakout env(env_cfg);
  const EnvSpec spec = env_cfg.env_spec(cfg.window);
  CompiledParams model(params, spec);
  std::mt19937_64 rng(policy_seed);
  PlannerOptions popts = cfg.planner;
  popts.prefer_constrained = cfg.prefer_constrained;
  popts.avoid_negative_reward = cfg.avoid_negative_reward;
  popts.search_fallback = cfg.search_fallback;
  popts.require_escape = cfg.require_escape;

  EpisodeRecord rec;
  rec.seed = env_seed;
  const std::vector<std::uint8_t> first_types = env.reset(env_seed).type_map;
  StateMatrix curr = StateMatrix::from_types(first_types, spec.num_types);
  StateMatrix prev = curr;
  bool first = true;
  std::vector<int> queue;
  std::size_t cursor = 0;
  std::optional<StateMatrix> expected;
  // The game and the planner are deterministic, so a repeated frame pair
  // means the agent is circling without progress.
  std::unordered_set<std::string> visited;
  std::string curr_key(first_types.begin(), first_types.end());
  std::string prev_key = curr_key;
  std::bernoulli_distribution explore(std::clamp(explore_epsilon, 0.0, 1.0));
  if (render) render(env.render_ascii());

  while (!env.done()) {
    const FrameStack frames{prev, curr};
    int action = -1;
    const bool looping = cfg.break_loops && !visited.insert(prev_key + curr_key).second;
    const bool random_step = looping || (explore_epsilon > 0 && explore(rng));
    if (random_step) {
      queue.clear();
      cursor = 0;
      expected.reset();
    }
    if (!explore_only && !random_step) {
      const bool diverged = expected && !(*expected == curr);
      if (cfg.replan_every_step || cursor >= queue.size() || diverged) {
        FactorGraph g = unroll(frames, model, cfg.horizon);
        Planner planner(g, popts);
        ++rec.plans_tried;
        auto p = planner.plan(&model);
        queue.clear();
        cursor = 0;
        if (p) {
          ++rec.plans_ok;
          queue = p->actions;
        }
      }
      if (cursor < queue.size()) {
        action = queue[cursor++];
        if (!cfg.replan_every_step) expected = predict_action(frames, model, action).next;
      } else {
        expected.reset();
      }
    }
    if (action < 0) action = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.num_actions));

    Observation obs = env.step(action);
    StateMatrix next = StateMatrix::from_types(obs.type_map, spec.num_types);
    prev_key = std::move(curr_key);
    curr_key.assign(obs.type_map.begin(), obs.type_map.end());
    if (buffer && !first) buffer->insert(Transition{frames, action, next, obs.reward});
    rec.total_reward += obs.reward;
    prev = std::move(curr);
    curr = std::move(next);
    first = false;
    if (render) render(env.render_ascii());
  }
  rec.steps = env.state().step;
  rec.bricks = env.state().bricks_destroyed;
  rec.lives_lost = env.state().balls_dropped;
  return rec;
}

namespace {

std::vector<std::size_t> schema_counts(const ParameterSet& p)
{
  std::vector<std::size_t> out;
  for (const auto& t : p.tags()) out.push_back(p.matrix(t).size());
  return out;
}

std::uint64_t policy_seed_for(std::uint64_t seed, int episode)
{
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(episode) * 0xBF58476D1CE4E5B9ULL + 1;
}

}  // namespace

TrainingResult run_training(const RunConfig& cfg, const Progress& progress, const EpochHook& hook)
{
  cfg.validate();
  const EnvSpec spec = cfg.env_spec();
  TrainingResult out{{}, ParameterSet(spec.num_types, static_cast<std::size_t>(spec.row_length()), cfg.cap), {}};
  ReplayBuffer buffer(spec);
  Learner learner(spec, cfg.learn);
  const std::uint64_t seed = cfg.seeds.front();
  for (int k = 0; k < cfg.episodes; ++k) {
    EpisodeRecord rec = play_episode(cfg, cfg.env, out.params, seed + static_cast<std::uint64_t>(k),
                                     policy_seed_for(seed, k), k < cfg.warmup_episodes, &buffer, {},
                                     cfg.explore_epsilon);
    rec.episode = k;
    out.last_report = learner.learn_epoch(buffer, out.params);
    if (hook) hook(buffer, learner, out.params, out.last_report);
    rec.schemas = schema_counts(out.params);
    out.records.push_back(rec);
    if (progress) progress(rec, out.last_report.summary());
  }
  return out;
}

std::vector<EpisodeRecord> run_eval(const RunConfig& cfg, const ParameterSet& params, int num_balls,
                                    const Progress& progress)
{
  cfg.validate();
  BreakoutConfig env = cfg.env;
  env.num_balls = num_balls;
  env.validate();
  std::vector<std::vector<EpisodeRecord>> per_seed(cfg.seeds.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    workers.emplace_back([&, i] {
      for (int k = 0; k < cfg.episodes; ++k) {
        const std::uint64_t seed = cfg.seeds[i];
        EpisodeRecord rec = play_episode(cfg, env, params, seed + static_cast<std::uint64_t>(k),
                                         policy_seed_for(seed, k), false, nullptr);
        rec.episode = k;
        rec.schemas = schema_counts(params);
        per_seed[i].push_back(rec);
      }
    });
  }
  for (auto& w : workers) w.join();
  std::vector<EpisodeRecord> out;
  for (auto& v : per_seed)
    for (auto& r : v) {
      if (progress) progress(r, {});
      out.push_back(r);
    }
  return out;
}

void save_params(const ParameterSet& params, const EnvSpec& spec, std::ostream& os)
{
  os << "dsn-schemas v1\n";
  os << "D=" << spec.row_length() << " M=" << spec.num_types << " A=" << spec.num_actions << " window=" << spec.window_side
     << "\n";
  for (const auto& tag : params.tags()) {
    const SchemaMatrix& m = params.matrix(tag);
    for (std::size_t i = 0; i < m.size(); ++i) {
      os << tag.str();
      for_each_set_bit(m.column(i), [&](std::size_t b) { os << ' ' << b; });
      os << '\n';
    }
  }
}

void save_params(const ParameterSet& params, const EnvSpec& spec, const std::string& path)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write params file '" + path + "'");
  save_params(params, spec, f);
  if (!f) throw ConfigError("error writing params file '" + path + "'");
}

ParameterSet load_params(std::istream& is, const EnvSpec& spec, std::size_t cap)
{
  std::string line;
  if (!std::getline(is, line) || trim(line) != "dsn-schemas v1")
    throw ConfigError("params file: expected header 'dsn-schemas v1'");
  if (!std::getline(is, line)) throw ConfigError("params file: missing dimension line");
  std::map<std::string, long long> dims;
  {
    std::istringstream ls(line);
    std::string item;
    while (ls >> item) {
      auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("params file: malformed dimension '" + item + "'");
      dims[item.substr(0, eq)] = to_int(item.substr(0, eq), item.substr(eq + 1));
    }
  }
  const std::pair<const char*, long long> expect[] = {
      {"D", spec.row_length()}, {"M", spec.num_types}, {"A", spec.num_actions}, {"window", spec.window_side}};
  for (auto [name, value] : expect) {
    auto it = dims.find(name);
    if (it == dims.end()) throw ConfigError(std::string("params file: missing field ") + name);
    if (it->second != value)
      throw ConfigError(std::string("params file: field ") + name + "=" + std::to_string(it->second) +
                        " does not match the configured layout (" + std::to_string(value) + ")");
  }
  const auto d = static_cast<std::size_t>(spec.row_length());
  ParameterSet params(spec.num_types, d, cap);
  int lineno = 2;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag_s;
    ls >> tag_s;
    MatrixTag tag = MatrixTag::parse(tag_s);
    SchemaMatrix& m = params.matrix(tag);
    SchemaVector w(d);
    long long last = -1, b = 0;
    std::string tok;
    while (ls >> tok) {
      b = to_int("bit", tok);
      if (b <= last || b >= static_cast<long long>(d))
        throw ConfigError("params file line " + std::to_string(lineno) + ": bit indices must ascend within [0, D)");
      w.set(static_cast<std::size_t>(b));
      last = b;
    }
    if (w.empty()) throw ConfigError("params file line " + std::to_string(lineno) + ": empty schema");
    if (m.size() >= cap) throw ConfigError("params file: matrix " + tag.str() + " exceeds the schema cap");
    m.add(w);
  }
  return params;
}

ParameterSet load_params(const std::string& path, const EnvSpec& spec, std::size_t cap)
{
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open params file '" + path + "'");
  return load_params(f, spec, cap);
}

void emit_metrics(const std::vector<EpisodeRecord>& records, std::ostream& os)
{
  os << "episode,seed,total_reward,steps,bricks,lives_lost,plans_ok,plans_tried\n";
  for (const auto& r : records)
    os << r.episode << ',' << r.seed << ',' << r.total_reward << ',' << r.steps << ',' << r.bricks << ','
       << r.lives_lost << ',' << r.plans_ok << ',' << r.plans_tried << '\n';
  // Summary rows per seed group. Training seeds advance per episode, so the
  // group key is the first seed of each run of consecutive episodes.
  std::vector<std::pair<std::uint64_t, std::vector<const EpisodeRecord*>>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    bool new_group = groups.empty() || r.episode == 0 ||
                     (i > 0 && r.episode != records[i - 1].episode + 1);
    if (new_group) groups.push_back({r.seed, {}});
    groups.back().second.push_back(&r);
  }
  for (const auto& [seed, rs] : groups) {
    double n = static_cast<double>(rs.size());
    std::vector<double> mean(6, 0.0), var(6, 0.0);
    auto values = [](const EpisodeRecord* r) {
      return std::vector<double>{double(r->total_reward), double(r->steps), double(r->bricks),
                                 double(r->lives_lost), double(r->plans_ok), double(r->plans_tried)};
    };
    for (auto* r : rs) {
      auto v = values(r);
      for (std::size_t k = 0; k < 6; ++k) mean[k] += v[k] / n;
    }
    for (auto* r : rs) {
      auto v = values(r);
      for (std::size_t k = 0; k < 6; ++k) var[k] += (v[k] - mean[k]) * (v[k] - mean[k]) / n;
    }
    os << std::fixed << std::setprecision(4);
    os << "mean," << seed;
    for (double x : mean) os << ',' << x;
    os << "\nstd," << seed;
    for (double x : var) os << ',' << std::sqrt(x);
    os << '\n';
    os.unsetf(std::ios::floatfield);
  }
}

void emit_metrics(const std::vector<EpisodeRecord>& records, const std::string& path)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write metrics file '" + path + "'");
  emit_metrics(records, f);
}

double mean_reward(const std::vector<EpisodeRecord>& records)
{
  if (records.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records) s += r.total_reward;
  return s / static_cast<double>(records.size());
}

}  // namespace dsn

// dsn: train, evaluate and inspect schema networks on grid Breakout.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "dsn/agent.hpp"
#include "dsn/errors.hpp"
#include "dsn/forward_model.hpp"
#include "dsn/planner.hpp"

using namespace dsn;

namespace {

struct Common {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string params;
  std::string out;
  int episodes = -1;
  int horizon = -1;
};

void add_common(CLI::App* app, Common& c)
{
  app->add_option("--config", c.config, "key = value run configuration")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seeds, "environment seed (repeat for several evaluation seeds)");
  app->add_option("--params", c.params, "schema parameter file");
  app->add_option("--out", c.out, "output path");
  app->add_option("--episodes", c.episodes, "episodes (per seed when evaluating)")->check(CLI::NonNegativeNumber);
  app->add_option("--horizon", c.horizon, "planning horizon")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Common& c)
{
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (!c.seeds.empty()) cfg.seeds = c.seeds;
  if (!c.params.empty()) cfg.params_path = c.params;
  if (c.episodes >= 0) cfg.episodes = c.episodes;
  if (c.horizon > 0) cfg.horizon = c.horizon;
  cfg.validate();
  return cfg;
}

void print_record(const EpisodeRecord& r)
{
  std::printf("episode %d seed %llu reward %d steps %d bricks %d lost %d plans %d/%d\n", r.episode,
              static_cast<unsigned long long>(r.seed), r.total_reward, r.steps, r.bricks, r.lives_lost, r.plans_ok,
              r.plans_tried);
  std::fflush(stdout);
}

int cmd_train(const Common& c, const std::string& metrics_out)
{
  RunConfig cfg = resolve(c);
  if (!c.out.empty()) cfg.params_path = c.out;
  if (!metrics_out.empty()) cfg.metrics_path = metrics_out;
  TrainingResult res = run_training(cfg, [](const EpisodeRecord& r, const std::string& detail) {
    print_record(r);
    if (!detail.empty()) std::printf("  %s\n", detail.c_str());
  });
  save_params(res.params, cfg.env_spec(), cfg.params_path);
  emit_metrics(res.records, cfg.metrics_path);
  std::printf("mean reward %.3f over %zu episodes; %zu schemas saved to %s\n", mean_reward(res.records),
              res.records.size(), res.params.total_schemas(), cfg.params_path.c_str());
  return 0;
}

int cmd_eval(const Common& c, int balls, bool baseline)
{
  RunConfig cfg = resolve(c);
  ParameterSet params = load_params(cfg.params_path, cfg.env_spec(), cfg.cap);
  auto run = [&](int n) {
    auto recs = run_eval(cfg, params, n, [](const EpisodeRecord& r, const std::string&) { print_record(r); });
    std::printf("%d-ball mean reward %.3f over %zu episodes\n", n, mean_reward(recs), recs.size());
    return recs;
  };
  double base = 0.0;
  if (baseline) base = mean_reward(run(1));
  auto recs = run(balls);
  emit_metrics(recs, c.out.empty() ? cfg.metrics_path : c.out);
  if (baseline) {
    const double m = mean_reward(recs);
    std::printf("transfer ratio %.3f\n", base != 0.0 ? m / base : 0.0);
  }
  return 0;
}

int cmd_play(const Common& c, bool render, int balls)
{
  RunConfig cfg = resolve(c);
  const EnvSpec spec = cfg.env_spec();
  ParameterSet params = c.params.empty() && !std::ifstream(cfg.params_path)
                            ? ParameterSet(spec.num_types, static_cast<std::size_t>(spec.row_length()), cfg.cap)
                            : load_params(cfg.params_path, spec, cfg.cap);
  BreakoutConfig env = cfg.env;
  env.num_balls = balls;
  env.validate();
  const std::uint64_t seed = cfg.seeds.front();
  int frame = 0;
  auto show = [&](const std::string& ascii) { std::printf("-- step %d\n%s", frame++, ascii.c_str()); };
  EpisodeRecord r = play_episode(cfg, env, params, seed, seed + 1, false, nullptr,
                                 render ? std::function<void(const std::string&)>(show) : nullptr);
  print_record(r);
  return 0;
}

int cmd_dump_graph(const Common& c, int steps, const std::string& input)
{
  if (!input.empty()) {
    // Oracle mode: plan on a serialized graph, no environment involved.
    std::ifstream f(input);
    if (!f) throw ConfigError("cannot open graph file '" + input + "'");
    FactorGraph g = parse_graph(f);
    auto p = plan(g);
    if (!p) {
      std::printf("no plan\n");
      return 0;
    }
    std::printf("target %s actions", p->target_id.str().c_str());
    for (int a : p->actions) std::printf(" %d", a);
    std::printf("\n");
    return 0;
  }
  RunConfig cfg = resolve(c);
  const EnvSpec spec = cfg.env_spec();
  ParameterSet params = load_params(cfg.params_path, spec, cfg.cap);
  CompiledParams model(params, spec);
  Breakout env(cfg.env);
  StateMatrix curr = StateMatrix::from_types(env.reset(cfg.seeds.front()).type_map, spec.num_types);
  StateMatrix prev = curr;
  for (int k = 0; k < steps && !env.done(); ++k) {
    prev = std::move(curr);
    curr = StateMatrix::from_types(env.step(noop).type_map, spec.num_types);
  }
  FactorGraph g = unroll(FrameStack{prev, curr}, model, cfg.horizon);
  if (c.out.empty()) {
    dump_graph(g, std::cout);
  } else {
    std::ofstream f(c.out);
    if (!f) throw ConfigError("cannot write '" + c.out + "'");
    dump_graph(g, f);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Delta schema network on grid Breakout"};
  app.require_subcommand(1);

  Common train_o, eval_o, transfer_o, play_o, dump_o;
  std::string metrics_out;
  auto* train = app.add_subcommand("train", "learn schemas by playing; writes params and metrics");
  add_common(train, train_o);
  train->add_option("--metrics", metrics_out, "metrics CSV path");

  auto* eval = app.add_subcommand("eval", "play without learning on every seed; --out sets the metrics CSV");
  add_common(eval, eval_o);

  bool baseline = false;
  auto* transfer = app.add_subcommand("transfer", "zero-shot evaluation on the two-ball variant");
  add_common(transfer, transfer_o);
  transfer->add_flag("--baseline", baseline, "also evaluate the one-ball game and print the ratio");

  bool render = false;
  int balls = 1;
  auto* play = app.add_subcommand("play", "play one episode");
  add_common(play, play_o);
  play->add_flag("--render", render, "print the board after every step");
  play->add_option("--balls", balls, "1 or 2")->check(CLI::Range(1, 2));

  int steps = 0;
  std::string input;
  auto* dump = app.add_subcommand("dump-graph", "write the unrolled factor graph after some noop steps");
  add_common(dump, dump_o);
  dump->add_option("--steps", steps, "noop steps before unrolling")->check(CLI::NonNegativeNumber);
  dump->add_option("--input", input, "plan on this graph dump instead")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return cmd_train(train_o, metrics_out);
    if (*eval) return cmd_eval(eval_o, 1, false);
    if (*transfer) return cmd_eval(transfer_o, 2, baseline);
    if (*play) return cmd_play(play_o, render, balls);
    if (*dump) return cmd_dump_graph(dump_o, steps, input);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

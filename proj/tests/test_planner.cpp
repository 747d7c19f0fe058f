#include <doctest.h>

#include <functional>
#include <random>
#include <sstream>

#include "dsn/forward_model.hpp"
#include "dsn/planner.hpp"
#include "support/fuzz.hpp"

using namespace dsn;

namespace {

using fuzz::strip_spec;

constexpr int kNoop = 0, kLeft = 1, kRight = 2;

SchemaInstance inst(int out, std::vector<int> in, int action = -1) { return SchemaInstance{out, std::move(in), action, {}, 0, 0}; }

// Truth of a node under one concrete action sequence, straight from the graph
// structure: observed nodes hold, otherwise the self-transition or any schema
// whose action matches and whose inputs all hold.
bool holds(const FactorGraph& g, int node, const std::vector<int>& actions)
{
  const Node& n = g.node(node);
  if (FactorGraph::observed(n.id.layer)) return true;
  if (n.self_input >= 0 && holds(g, n.self_input, actions)) return true;
  const int a = actions[static_cast<std::size_t>(n.id.layer - 1)];
  for (int s : n.schemas) {
    const SchemaInstance& si = g.instance(s);
    if (si.required_action >= 0 && si.required_action != a) continue;
    bool all = true;
    for (int in : si.inputs) all = all && holds(g, in, actions);
    if (all) return true;
  }
  return false;
}

void for_each_sequence(int len, int num_actions, const std::function<void(const std::vector<int>&)>& f)
{
  std::vector<int> a(static_cast<std::size_t>(len), 0);
  while (true) {
    f(a);
    int i = 0;
    while (i < len && ++a[static_cast<std::size_t>(i)] == num_actions) a[static_cast<std::size_t>(i++)] = 0;
    if (i == len) return;
  }
}

bool exists_sequence(const FactorGraph& g, int target)
{
  bool found = false;
  for_each_sequence(g.node(target).id.layer, g.spec().num_actions, [&](const std::vector<int>& a) {
    found = found || holds(g, target, a);
  });
  return found;
}

std::vector<Reach> marks(const FactorGraph& g)
{
  std::vector<Reach> out;
  for (const Node& n : g.nodes()) out.push_back(n.reach);
  return out;
}

void check_exclusive(const FactorGraph& g, const Planner& p)
{
  for (std::size_t t = 0; t < p.constraints().size(); ++t) {
    const LayerConstraint& c = p.constraints()[t];
    if (c.action < 0) {
      CHECK(c.committed.empty());
      continue;
    }
    for (int m : c.committed) {
      CHECK(g.node(m).id.layer == static_cast<int>(t) + 1);
      bool has = false;
      for (int s : g.node(m).schemas) has = has || g.instance(s).required_action == c.action;
      CHECK(has);
    }
  }
}

// Random layered graph: a few attribute nodes per layer, self links and
// schemas drawn from the previous layers, rewards on top.
FactorGraph random_graph(std::mt19937_64& rng, int horizon)
{
  FactorGraph g(strip_spec(), horizon);
  std::vector<std::vector<int>> by_layer(static_cast<std::size_t>(horizon) + 1);
  for (int e = 0; e < 3; ++e) by_layer[0].push_back(g.add_attribute(0, e, 1));
  auto pick_below = [&](int layer) {
    int l = layer - 1 - static_cast<int>(rng() % 2 == 0 && layer >= 2 ? 1 : 0);
    const auto& pool = by_layer[static_cast<std::size_t>(l)];
    return pool[rng() % pool.size()];
  };
  auto add_schemas = [&](int node, int layer) {
    const int k = static_cast<int>(rng() % 3);
    for (int i = 0; i < k; ++i) {
      std::vector<int> in;
      const int lits = 1 + static_cast<int>(rng() % 2);
      for (int l = 0; l < lits; ++l) in.push_back(pick_below(layer));
      g.add_instance(inst(node, in, static_cast<int>(rng() % 4) - 1));
    }
  };
  for (int layer = 1; layer <= horizon; ++layer) {
    for (int e = 0; e < 4; ++e) {
      int n = g.add_attribute(layer, e, 1 + static_cast<int>(rng() % 3));
      auto& prev = by_layer[static_cast<std::size_t>(layer - 1)];
      if (rng() % 4 == 0) g.set_self(n, prev[rng() % prev.size()]);
      add_schemas(n, layer);
      by_layer[static_cast<std::size_t>(layer)].push_back(n);
    }
    if (rng() % 2) add_schemas(g.add_reward(layer, 1), layer);
  }
  return g;
}

}  // namespace

TEST_CASE("select_targets")
{
  FactorGraph g(strip_spec(), 5);
  SUBCASE("positive rewards, closest first")
  {
    int r5 = g.add_reward(5, 1);
    g.add_reward(4, -1);
    int r3 = g.add_reward(3, 1);
    Planner p(g);
    CHECK(p.select_targets() == std::vector<int>{r3, r5});
  }
  SUBCASE("no reward nodes") { CHECK(Planner(g).select_targets().empty()); }
  SUBCASE("negative rewards only")
  {
    g.add_reward(2, -1);
    g.add_reward(4, -1);
    CHECK(Planner(g).select_targets().empty());
  }
}

TEST_CASE("backtrace_schema")
{
  FactorGraph g(strip_spec(), 5);
  int a = g.add_attribute(0, 0, 1);
  int b = g.add_attribute(-1, 1, 2);
  SUBCASE("observed preconditions")
  {
    int x = g.add_attribute(1, 0, 2);
    int s = g.add_instance(inst(x, {a, b}));
    Planner p(g);
    CHECK(p.backtrace_schema(s));
    CHECK(p.instance_mark(s) == Reach::yes);
  }
  SUBCASE("a precondition that nothing produces")
  {
    int lone = g.add_attribute(1, 3, 3);
    int x = g.add_attribute(2, 0, 2);
    int s = g.add_instance(inst(x, {a, lone}));
    Planner p(g);
    CHECK_FALSE(p.backtrace_schema(s));
    CHECK(g.node(lone).reach == Reach::no);
    CHECK(p.instance_mark(s) == Reach::no);
  }
  SUBCASE("chain of depth three marks every node")
  {
    int n1 = g.add_attribute(1, 0, 2);
    int n2 = g.add_attribute(2, 0, 3);
    int n3 = g.add_attribute(3, 0, 1);
    g.add_instance(inst(n1, {a}));
    g.add_instance(inst(n2, {n1, b}));
    int s3 = g.add_instance(inst(n3, {n2}));
    int r = g.add_reward(4, 1);
    int sr = g.add_instance(inst(r, {n3}));
    Planner p(g);
    CHECK(p.backtrace_schema(sr));
    for (int n : {n1, n2, n3}) CHECK(g.node(n).reach == Reach::yes);
    CHECK(p.instance_mark(s3) == Reach::yes);
  }
}

TEST_CASE("backtrace_node_by_schemas")
{
  FactorGraph g(strip_spec(), 3);
  int a = g.add_attribute(0, 0, 1);
  int dead = g.add_attribute(1, 4, 3);
  int x = g.add_attribute(2, 0, 2);
  SUBCASE("stops at the first reachable schema")
  {
    int s0 = g.add_instance(inst(x, {a}));
    int s1 = g.add_instance(inst(x, {a}));
    Planner p(g);
    std::vector<int> list{s0, s1};
    CHECK(p.backtrace_node_by_schemas(x, list));
    CHECK(p.evaluated()[static_cast<std::size_t>(s0)] == 1);
    CHECK(p.evaluated()[static_cast<std::size_t>(s1)] == 0);
  }
  SUBCASE("empty list")
  {
    Planner p(g);
    CHECK_FALSE(p.backtrace_node_by_schemas(x, {}));
    CHECK(g.node(x).reach == Reach::unknown);
  }
  SUBCASE("only the second schema is reachable")
  {
    int s0 = g.add_instance(inst(x, {dead}));
    int s1 = g.add_instance(inst(x, {a}));
    Planner p(g);
    std::vector<int> list{s0, s1};
    CHECK(p.backtrace_node_by_schemas(x, list));
    CHECK(g.node(x).reach == Reach::yes);
    CHECK(p.instance_mark(s0) == Reach::no);
  }
}

TEST_CASE("backtrace_node")
{
  FactorGraph g(strip_spec(), 5);
  int a = g.add_attribute(0, 0, 1);

  SUBCASE("self-transition chain adds no constraint")
  {
    int prev = a;
    for (int l = 1; l <= 4; ++l) {
      int n = g.add_attribute(l, 0, 1);
      g.set_self(n, prev);
      g.add_instance(inst(n, {a}, kLeft));  // never needed
      prev = n;
    }
    Planner p(g);
    CHECK(p.backtrace_node(prev));
    for (const LayerConstraint& c : p.constraints()) CHECK(c.action < 0);
  }

  // Layer-3 nodes x and y, both feeding a reward at layer 4. x is traced
  // first and takes its lowest reachable action at t=2.
  int x = g.add_attribute(3, 1, 2);
  int y = g.add_attribute(3, 2, 2);
  int r = g.add_reward(4, 1);
  g.add_instance(inst(r, {x, y}));

  SUBCASE("negotiation switches the layer when the committed node accepts the new action")
  {
    g.add_instance(inst(x, {a}, kLeft));
    g.add_instance(inst(x, {a}, kRight));
    g.add_instance(inst(y, {a}, kRight));
    Planner p(g);
    REQUIRE(p.backtrace_node(x));
    CHECK(p.constraints()[2].action == kLeft);
    CHECK(p.backtrace_node(y));
    CHECK(p.constraints()[2].action == kRight);
    CHECK(g.node(x).reach == Reach::yes);
    CHECK(g.node(y).reach == Reach::yes);
    std::vector<int> committed = p.constraints()[2].committed;
    std::sort(committed.begin(), committed.end());
    CHECK(committed == std::vector<int>{x, y});
    CHECK(p.stats().negotiations == 1);
    check_exclusive(g, p);

    auto plan = Planner(g).plan_target(r);
    REQUIRE(plan);
    CHECK(plan->actions == std::vector<int>{kNoop, kNoop, kRight, kNoop});
    CHECK(plan->constrained_layers == std::vector<int>{2});
    CHECK(holds(g, r, plan->actions));
    // Exhaustive check: `right` at t=2 is the only way.
    int count = 0;
    for_each_sequence(4, 3, [&](const std::vector<int>& s) {
      if (holds(g, r, s)) {
        ++count;
        CHECK(s[2] == kRight);
      }
    });
    CHECK(count == 27);
  }

  SUBCASE("empty negotiated set leaves constraints unchanged")
  {
    g.add_instance(inst(x, {a}, kRight));
    g.add_instance(inst(y, {a}, kLeft));
    Planner p(g);
    REQUIRE(p.backtrace_node(x));
    const JointConstraints before = p.constraints();
    CHECK_FALSE(p.backtrace_node(y));
    CHECK(p.constraints() == before);
    CHECK(g.node(y).reach == Reach::no);
    CHECK(g.node(x).reach == Reach::yes);
    CHECK(p.stats().negotiations == 0);
    CHECK_FALSE(p.plan_target(r));
    CHECK_FALSE(exists_sequence(g, r));
  }

  SUBCASE("a failed negotiation restores every mark and constraint")
  {
    // x accepts `left` only through a precondition that cannot be reached.
    int dead = g.add_attribute(2, 3, 3);
    g.add_instance(inst(x, {a}, kRight));
    g.add_instance(inst(x, {dead}, kLeft));
    g.add_instance(inst(y, {a}, kLeft));
    Planner p(g);
    REQUIRE(p.backtrace_node(x));
    const JointConstraints before = p.constraints();
    std::vector<Reach> marks_before = marks(g);
    CHECK_FALSE(p.backtrace_node(y));
    CHECK(p.stats().negotiations == 1);
    CHECK(p.constraints() == before);
    std::vector<Reach> after = marks(g);
    marks_before[static_cast<std::size_t>(y)] = Reach::no;  // the only finalized change
    CHECK(after == marks_before);
    CHECK_FALSE(exists_sequence(g, r));
  }

  SUBCASE("negotiation depth cap abandons the target")
  {
    g.add_instance(inst(x, {a}, kLeft));
    g.add_instance(inst(x, {a}, kRight));
    g.add_instance(inst(y, {a}, kRight));
    PlannerOptions o;
    o.max_negotiation_depth = 0;
    Planner p(g, o);
    CHECK_FALSE(p.plan_target(r));
    CHECK(p.aborted());
    CHECK(p.stats().aborted == 1);
  }
}

TEST_CASE("plan")
{
  FactorGraph g(strip_spec(), 5);
  int a = g.add_attribute(0, 0, 1);
  SUBCASE("reward reachable at layer 1")
  {
    int r = g.add_reward(1, 1);
    g.add_instance(inst(r, {a}));
    auto p = plan(g);
    REQUIRE(p);
    CHECK(p->actions == std::vector<int>{kNoop});
    CHECK(p->target == r);
    CHECK(p->constrained_layers.empty());
  }
  SUBCASE("first target unreachable, second reachable")
  {
    int dead = g.add_attribute(1, 2, 2);
    int r2 = g.add_reward(2, 1);
    g.add_instance(inst(r2, {dead}));
    int x = g.add_attribute(2, 1, 3);
    g.add_instance(inst(x, {a}, kRight));
    int r3 = g.add_reward(3, 1);
    g.add_instance(inst(r3, {x}));
    auto p = plan(g);
    REQUIRE(p);
    CHECK(p->target == r3);
    CHECK(p->actions == std::vector<int>{kNoop, kRight, kNoop});
    CHECK(p->constrained_layers == std::vector<int>{1});
  }
  SUBCASE("marks from a failed target do not leak into the next")
  {
    // Both targets share x; the first fails for a reason unrelated to x.
    int dead = g.add_attribute(1, 2, 2);
    int x = g.add_attribute(1, 1, 3);
    g.add_instance(inst(x, {a}, kLeft));
    int r1 = g.add_reward(2, 1);
    g.add_instance(inst(r1, {x, dead}));
    int r2 = g.add_reward(3, 1);
    int y = g.add_attribute(2, 1, 3);
    g.set_self(y, x);
    g.add_instance(inst(r2, {y}));
    auto p = plan(g);
    REQUIRE(p);
    CHECK(p->target == r2);
    CHECK(p->actions == std::vector<int>{kLeft, kNoop, kNoop});
  }
  SUBCASE("empty queue") { CHECK_FALSE(plan(g)); }
}

TEST_CASE("plans on serialized graphs")
{
  FactorGraph g(strip_spec(), 3);
  int a = g.add_attribute(0, 0, 1);
  int x = g.add_attribute(1, 0, 2);
  g.add_instance(inst(x, {a}, kLeft));
  int r = g.add_reward(2, 1);
  g.add_instance(inst(r, {x}));
  std::stringstream ss;
  dump_graph(g, ss);
  FactorGraph back = parse_graph(ss);
  auto p = plan(back);
  REQUIRE(p);
  CHECK(p->actions == std::vector<int>{kLeft, kNoop});
}

TEST_CASE("fuzzed graphs: exclusivity and soundness against exhaustive sequences")
{
  std::mt19937_64 rng(7);
  int reachable = 0, found = 0, missed = 0;
  for (int trial = 0; trial < 400; ++trial) {
    FactorGraph g = random_graph(rng, 1 + static_cast<int>(rng() % 5));
    Planner p(g);
    for (int target : p.select_targets()) {
      auto plan = p.plan_target(target);
      check_exclusive(g, p);
      const bool exists = exists_sequence(g, target);
      reachable += exists;
      if (plan) {
        ++found;
        REQUIRE(static_cast<int>(plan->actions.size()) == g.node(target).id.layer);
        for (std::size_t t = 0; t < plan->actions.size(); ++t) {
          const int c = p.constraints()[t].action;
          CHECK(plan->actions[t] == (c >= 0 ? c : kNoop));
        }
        CHECK(holds(g, target, plan->actions));
      } else if (exists) {
        ++missed;
      }
    }
  }
  MESSAGE("targets with a sequence: " << reachable << ", backtraced: " << found << ", missed: " << missed);
  CHECK(reachable > 100);
}

TEST_CASE("fuzzed models: validity, exhaustive agreement, reward(-) avoidance")
{
  const EnvSpec s = strip_spec();
  std::mt19937_64 rng(11);
  int with_sequence = 0, backtrace_missed = 0, clean_cases = 0, escape_cases = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    ParameterSet params = fuzz::random_params(s, rng);
    CompiledParams model(params, s);
    FrameStack frames{fuzz::random_state(s, rng), fuzz::random_state(s, rng)};
    const int horizon = 1 + static_cast<int>(rng() % 5);
    FactorGraph g = unroll(frames, model, horizon);
    fuzz::Exhaustive ex = fuzz::enumerate(model, frames, horizon, &g);
    with_sequence += ex.any;

    // Pure backtracing: every returned plan is valid in the model.
    {
      Planner p(g);
      auto plan = p.plan(&model);
      check_exclusive(g, p);
      if (plan) {
        CHECK(plan_valid(g, model, *plan));
        CHECK(static_cast<int>(plan->actions.size()) == plan->target_id.layer);
      }
      backtrace_missed += ex.any && !plan;
    }
    // With the rollout search the planner agrees with exhaustive enumeration.
    {
      PlannerOptions o;
      o.search_fallback = true;
      Planner p(g, o);
      auto plan = p.plan(&model);
      CHECK(plan.has_value() == ex.any);
      if (plan) CHECK(plan_valid(g, model, *plan));
    }
    // Avoiding R-: a clean sequence exists iff a clean plan comes back.
    {
      PlannerOptions o;
      o.search_fallback = true;
      o.avoid_negative_reward = true;
      Planner p(g, o);
      auto plan = p.plan(&model);
      CHECK(plan.has_value() == ex.any);
      if (plan && ex.clean) {
        ++clean_cases;
        SequenceOutcome out = simulate_sequence(g, model, plan->actions);
        CHECK(out.reaches);
        CHECK(out.negative_before < 0);
      }
    }
    // Escape: with unlimited checks the plan leaves an R--free continuation
    // whenever one exists.
    {
      PlannerOptions o;
      o.search_fallback = true;
      o.avoid_negative_reward = true;
      o.require_escape = true;
      o.max_escape_checks = 1'000'000;
      Planner p(g, o);
      auto plan = p.plan(&model);
      CHECK(plan.has_value() == ex.any);
      if (plan && ex.escape) {
        ++escape_cases;
        SequenceOutcome out = simulate_sequence(g, model, plan->actions);
        CHECK(out.reaches);
        CHECK(out.negative_before < 0);
        FrameStack end = rollout_frames(g, model, plan->actions);
        CHECK(fuzz::continuation_free(model, end, static_cast<int>(plan->actions.size()), horizon));
      }
    }
  }
  MESSAGE("models with a rewarding sequence: " << with_sequence << ", missed by pure backtracing: "
                                               << backtrace_missed << ", clean: " << clean_cases
                                               << ", escaping: " << escape_cases);
  CHECK(with_sequence > 100);
  CHECK(clean_cases > 50);
  CHECK(escape_cases > 20);
}

TEST_CASE("prefer_constrained skips a free reward when a constrained one exists")
{
  FactorGraph g(strip_spec(), 4);
  int a = g.add_attribute(0, 0, 1);
  int r1 = g.add_reward(1, 1);
  g.add_instance(inst(r1, {a}));
  int x = g.add_attribute(1, 1, 2);
  g.add_instance(inst(x, {a}, kRight));
  int r2 = g.add_reward(2, 1);
  g.add_instance(inst(r2, {x}));
  CHECK(plan(g)->target == r1);
  PlannerOptions o;
  o.prefer_constrained = true;
  auto p = plan(g, o);
  REQUIRE(p);
  CHECK(p->target == r2);
  CHECK(p->actions == std::vector<int>{kRight, kNoop});
}

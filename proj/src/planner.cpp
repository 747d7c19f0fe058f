#include "dsn/planner.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "dsn/errors.hpp"

namespace dsn {

namespace {

std::string frame_key(const FrameStack& f)
{
  std::string k;
  for (auto w : f.prev.bits().data()) k.append(reinterpret_cast<const char*>(&w), sizeof w);
  for (auto w : f.curr.bits().data()) k.append(reinterpret_cast<const char*>(&w), sizeof w);
  return k;
}

}  // namespace

Planner::Planner(FactorGraph& graph, PlannerOptions opts)
    : g_(graph), opts_(opts), constraints_(static_cast<std::size_t>(graph.horizon())),
      inst_reach_(graph.instances().size(), Reach::unknown), via_(graph.size(), -1),
      evaluated_(graph.instances().size(), 0)
{
}

void Planner::reset()
{
  g_.reset_marks();
  std::fill(constraints_.begin(), constraints_.end(), LayerConstraint{});
  std::fill(inst_reach_.begin(), inst_reach_.end(), Reach::unknown);
  std::fill(via_.begin(), via_.end(), -1);
  trail_.clear();
  depth_ = 0;
  visits_ = 0;
  aborted_ = false;
}

std::vector<int> Planner::select_targets() const
{
  std::vector<int> out;
  for (std::size_t i = 0; i < g_.size(); ++i) {
    const NodeId& id = g_.node(static_cast<int>(i)).id;
    if (id.kind == NodeId::Kind::reward && id.sign > 0) out.push_back(static_cast<int>(i));
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](int a, int b) { return g_.node(a).id.layer < g_.node(b).id.layer; });
  return out;
}

void Planner::set_mark(int node, Reach r)
{
  Reach& cur = g_.node(node).reach;
  if (cur == r) return;
  trail_.push_back({Undo::node_mark, node, static_cast<int>(cur), {}});
  cur = r;
}

void Planner::set_inst_mark(int inst, Reach r)
{
  Reach& cur = inst_reach_[static_cast<std::size_t>(inst)];
  if (cur == r) return;
  trail_.push_back({Undo::inst_mark, inst, static_cast<int>(cur), {}});
  cur = r;
}

void Planner::set_via(int node, int action)
{
  int& cur = via_[static_cast<std::size_t>(node)];
  if (cur == action) return;
  trail_.push_back({Undo::via, node, cur, {}});
  cur = action;
}

void Planner::set_constraint(int layer, LayerConstraint c)
{
  LayerConstraint& cur = constraints_[static_cast<std::size_t>(layer)];
  trail_.push_back({Undo::constraint, layer, 0, cur});
  cur = std::move(c);
}

void Planner::rollback(std::size_t point)
{
  while (trail_.size() > point) {
    TrailEntry& e = trail_.back();
    switch (e.kind) {
      case Undo::node_mark: g_.node(e.index).reach = static_cast<Reach>(e.old_value); break;
      case Undo::inst_mark: inst_reach_[static_cast<std::size_t>(e.index)] = static_cast<Reach>(e.old_value); break;
      case Undo::via: via_[static_cast<std::size_t>(e.index)] = e.old_value; break;
      case Undo::constraint: constraints_[static_cast<std::size_t>(e.index)] = std::move(e.old_constraint); break;
    }
    trail_.pop_back();
  }
}

std::vector<int> Planner::schemas_for(int node, int action) const
{
  std::vector<int> out;
  for (int s : g_.node(node).schemas)
    if (g_.instance(s).required_action == action) out.push_back(s);
  return out;
}

bool Planner::has_schemas_for(int node, int action) const
{
  for (int s : g_.node(node).schemas)
    if (g_.instance(s).required_action == action) return true;
  return false;
}

bool Planner::backtrace_schema(int inst)
{
  if (aborted_) return false;
  evaluated_[static_cast<std::size_t>(inst)] = 1;
  Reach known = inst_reach_[static_cast<std::size_t>(inst)];
  if (known != Reach::unknown) return known == Reach::yes;
  const std::size_t point = trail_.size();
  for (int pre : g_.instance(inst).inputs) {
    if (!backtrace_node(pre, -1)) {
      if (opts_.rollback_failed_schemas) rollback(point);
      set_inst_mark(inst, Reach::no);
      return false;
    }
  }
  set_inst_mark(inst, Reach::yes);
  return true;
}

bool Planner::backtrace_node_by_schemas(int node, std::span<const int> instances)
{
  for (int s : instances) {
    if (backtrace_schema(s)) {
      set_mark(node, Reach::yes);
      return true;
    }
    if (aborted_) return false;
  }
  return false;
}

bool Planner::backtrace_node(int node, int desired)
{
  if (aborted_) return false;
  Node& n = g_.node(node);
  if (n.reach == Reach::yes) return true;
  if (n.reach == Reach::no) return false;
  if (++visits_ > opts_.visit_budget) {
    aborted_ = true;
    return false;
  }
  const int layer = n.id.layer;
  if (layer < 1) return false;  // observed layers are always marked
  const int t = layer - 1;

  if (n.self_input >= 0 && backtrace_node(n.self_input, -1)) {
    set_mark(node, Reach::yes);
    set_via(node, -1);
    return true;
  }
  if (aborted_) return false;
  if (backtrace_node_by_schemas(node, schemas_for(node, -1))) {
    set_via(node, -1);
    return true;
  }
  if (aborted_) return false;

  const int num_actions = g_.spec().num_actions;
  if (desired >= 0) {
    if (backtrace_node_by_schemas(node, schemas_for(node, desired))) {
      set_via(node, desired);
      return true;
    }
    set_mark(node, Reach::no);
    return false;
  }

  const LayerConstraint current = constraints_[static_cast<std::size_t>(t)];
  if (current.action < 0) {
    for (int a = 0; a < num_actions; ++a) {
      auto list = schemas_for(node, a);
      if (list.empty()) continue;
      if (backtrace_node_by_schemas(node, list)) {
        set_constraint(t, LayerConstraint{a, {node}});
        set_via(node, a);
        return true;
      }
      if (aborted_) return false;
    }
    set_mark(node, Reach::no);
    return false;
  }

  auto same = schemas_for(node, current.action);
  if (!same.empty() && backtrace_node_by_schemas(node, same)) {
    LayerConstraint joined = current;
    joined.committed.push_back(node);
    set_constraint(t, std::move(joined));
    set_via(node, current.action);
    return true;
  }
  if (aborted_) return false;

  // Negotiation: an action every committed node also has a schema for.
  std::vector<int> negotiated;
  for (int a = 0; a < num_actions; ++a) {
    if (a == current.action || !has_schemas_for(node, a)) continue;
    bool all = true;
    for (int m : current.committed) all = all && has_schemas_for(m, a);
    if (all) negotiated.push_back(a);
  }
  if (!negotiated.empty()) {
    ++stats_.negotiations;
    if (++depth_ > opts_.max_negotiation_depth) {
      aborted_ = true;
      return false;
    }
    for (int a : negotiated) {
      const std::size_t point = trail_.size();
      bool ok = backtrace_node_by_schemas(node, schemas_for(node, a));
      LayerConstraint next{a, {node}};
      for (std::size_t k = 0; ok && k < current.committed.size(); ++k) {
        int m = current.committed[k];
        set_mark(m, Reach::unknown);
        set_via(m, -1);
        ok = backtrace_node(m, a);
        if (ok && via_[static_cast<std::size_t>(m)] == a) next.committed.push_back(m);
      }
      if (ok) {
        set_constraint(t, std::move(next));
        set_via(node, a);
        --depth_;
        return true;
      }
      rollback(point);
      if (aborted_) return false;
    }
    --depth_;
  }
  set_mark(node, Reach::no);
  return false;
}

Plan Planner::extract(int target) const
{
  Plan p;
  p.target = target;
  p.target_id = g_.node(target).id;
  const int len = p.target_id.layer;
  for (int t = 0; t < len; ++t) {
    const LayerConstraint& c = constraints_[static_cast<std::size_t>(t)];
    p.actions.push_back(c.action >= 0 ? c.action : 0);
    if (c.action >= 0) p.constrained_layers.push_back(t);
  }
  return p;
}

std::optional<Plan> Planner::plan_target(int target)
{
  reset();
  ++stats_.targets_tried;
  bool ok = backtrace_node(target, -1);
  if (aborted_) ++stats_.aborted;
  if (!ok || aborted_) return std::nullopt;
  return extract(target);
}

std::optional<Plan> Planner::plan(const CompiledParams* model)
{
  // Preference: constrained clean, searched, free clean, then the first
  // trapped and finally the first costly backtraced plan.
  std::optional<Plan> free_plan, trapped_plan, costly_plan;
  escape_checks_ = 0;
  const std::vector<int> targets = select_targets();
  for (int target : targets) {
    auto p = plan_target(target);
    if (!p) continue;
    bool costly = false;
    if (model && opts_.validate) {
      SequenceOutcome o = simulate_sequence(g_, *model, p->actions);
      if (!o.reaches) {
        ++stats_.invalid_plans;
        continue;
      }
      costly = opts_.avoid_negative_reward && o.negative_before >= 0;
    }
    if (costly) {
      ++stats_.costly_plans;
      if (!costly_plan) costly_plan = std::move(p);
      continue;
    }
    const bool constrained = !p->constrained_layers.empty();
    if ((constrained || !free_plan) && checks_escape(model) &&
        !escapes(*model, rollout_frames(g_, *model, p->actions), static_cast<int>(p->actions.size()))) {
      ++stats_.trapped_plans;
      if (!trapped_plan) trapped_plan = std::move(p);
      continue;
    }
    if (!opts_.prefer_constrained || !p->constrained_layers.empty()) return p;
    if (!free_plan) free_plan = std::move(p);
  }
  if (opts_.search_fallback && model) {
    ++stats_.searched;
    if (auto p = search(*model)) {
      ++stats_.search_plans;
      return p;
    }
  }
  if (free_plan) return free_plan;
  return trapped_plan ? trapped_plan : costly_plan;
}

bool Planner::escapes(const CompiledParams& model, FrameStack frames, int layer)
{
  // Breadth-first over R--free rollouts, merged on identical frames.
  ++escape_checks_;
  std::vector<FrameStack> frontier{std::move(frames)};
  std::size_t expanded = 0;
  const int num_actions = g_.spec().num_actions;
  for (; layer < g_.horizon(); ++layer) {
    std::unordered_set<std::string> seen;
    std::vector<FrameStack> next;
    for (const FrameStack& f : frontier) {
      for (int a = 0; a < num_actions; ++a) {
        if (++expanded > opts_.escape_budget) return true;
        StepPrediction p = predict_action(f, model, a);
        if (p.reward_neg) continue;
        FrameStack n{f.curr, std::move(p.next)};
        if (seen.insert(frame_key(n)).second) next.push_back(std::move(n));
      }
    }
    if (next.empty()) return false;
    frontier = std::move(next);
  }
  return true;
}

std::optional<Plan> Planner::search(const CompiledParams& model)
{
  // Breadth-first over single-action rollouts, one entry per distinct
  // predicted frame pair. The first layer where R+ fires wins; the target is
  // the graph's reward node at that layer when it has one.
  std::vector<int> target_at(static_cast<std::size_t>(g_.horizon()) + 1, -1);
  for (int t : select_targets()) {
    int l = g_.node(t).id.layer;
    if (l >= 1 && l <= g_.horizon() && target_at[static_cast<std::size_t>(l)] < 0) target_at[static_cast<std::size_t>(l)] = t;
  }
  const int last = g_.horizon();

  // A reward the all-noop rollout also collects needs no plan; with
  // prefer_constrained those layers are skipped.
  std::vector<char> free_at(static_cast<std::size_t>(last) + 1, 0);
  if (opts_.prefer_constrained) {
    FrameStack f = g_.origin;
    for (int l = 1; l <= last; ++l) {
      StepPrediction p = predict_action(f, model, 0);
      free_at[static_cast<std::size_t>(l)] = p.reward_pos ? 1 : 0;
      f = FrameStack{std::move(f.curr), std::move(p.next)};
    }
  }

  struct Item {
    FrameStack frames;
    std::vector<int> actions;
  };
  std::vector<Item> frontier{{g_.origin, {}}};
  std::size_t expanded = 0;
  const int num_actions = g_.spec().num_actions;
  for (int layer = 1; layer <= last && !frontier.empty(); ++layer) {
    std::unordered_set<std::string> seen;
    std::vector<Item> next;
    for (const Item& it : frontier) {
      for (int a = 0; a < num_actions; ++a) {
        if (++expanded > opts_.search_budget) return std::nullopt;
        StepPrediction p = predict_action(it.frames, model, a);
        if (opts_.avoid_negative_reward && p.reward_neg) continue;
        std::vector<int> acts = it.actions;
        acts.push_back(a);
        if (p.reward_pos && !free_at[static_cast<std::size_t>(layer)] &&
            (!checks_escape(&model) || escapes(model, FrameStack{it.frames.curr, p.next}, layer))) {
          Plan out;
          out.target = target_at[static_cast<std::size_t>(layer)];
          if (out.target >= 0)
            out.target_id = g_.node(out.target).id;
          else
            out.target_id = NodeId{NodeId::Kind::reward, layer, 0, 0, 1, 0};
          out.actions = std::move(acts);
          for (int t = 0; t < layer; ++t)
            if (out.actions[static_cast<std::size_t>(t)] != 0) out.constrained_layers.push_back(t);
          out.from_search = true;
          return out;
        }
        FrameStack f{it.frames.curr, std::move(p.next)};
        if (seen.insert(frame_key(f)).second) next.push_back(Item{std::move(f), std::move(acts)});
      }
    }
    frontier = std::move(next);
  }
  return std::nullopt;
}

SequenceOutcome simulate_sequence(const FactorGraph& graph, const CompiledParams& model, std::span<const int> actions)
{
  SequenceOutcome out;
  FrameStack f = graph.origin;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    StepPrediction p = predict_action(f, model, actions[t]);
    if (p.reward_neg && out.negative_before < 0) out.negative_before = static_cast<int>(t) + 1;
    if (t + 1 == actions.size()) out.reaches = p.reward_pos;
    f = FrameStack{std::move(f.curr), std::move(p.next)};
  }
  return out;
}

FrameStack rollout_frames(const FactorGraph& graph, const CompiledParams& model, std::span<const int> actions)
{
  FrameStack f = graph.origin;
  for (int a : actions) {
    StepPrediction p = predict_action(f, model, a);
    f = FrameStack{std::move(f.curr), std::move(p.next)};
  }
  return f;
}

bool sequence_reaches(const FactorGraph& graph, const CompiledParams& model, std::span<const int> actions)
{
  return simulate_sequence(graph, model, actions).reaches;
}

bool plan_valid(const FactorGraph& graph, const CompiledParams& model, const Plan& plan)
{
  return sequence_reaches(graph, model, plan.actions);
}

std::optional<Plan> plan(FactorGraph& graph, const PlannerOptions& opts, const CompiledParams* model)
{
  Planner p(graph, opts);
  return p.plan(model);
}

}  // namespace dsn

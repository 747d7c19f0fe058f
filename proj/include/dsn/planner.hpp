#pragma once

// Backtracing planner over an unrolled factor graph.
//
// A target reward node is traced back to the observed layers. A node is
// reachable through its self-transition, an action-independent schema, or a
// schema requiring an action at the layer below it. Each layer holds at most
// one action; a node whose only schemas need a different action than the one
// already committed there triggers a negotiation: an action acceptable to
// every committed node is tried, and the committed nodes are re-traced under
// it. A failed negotiation restores every mark and constraint it touched.
//
// Given a model, plan() re-simulates each backtraced plan with single
// actions and ranks it: clean, trapped (every continuation hits R-), or
// costly (R- on the way). When no clean constrained plan turns up, an
// optional breadth-first rollout search takes over before weaker plans are
// accepted.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dsn/forward_model.hpp"

namespace dsn {

struct LayerConstraint {
  int action = -1;             // -1: unconstrained
  std::vector<int> committed;  // nodes whose chosen schema needs `action`

  bool operator==(const LayerConstraint&) const = default;
};

using JointConstraints = std::vector<LayerConstraint>;  // one entry per action layer 0..T-1

struct Plan {
  std::vector<int> actions;             // length = target layer
  int target = -1;                      // node index; -1 for a rollout reward the graph lacks
  NodeId target_id;
  std::vector<int> constrained_layers;  // layers pinned by a constraint
  bool from_search = false;             // found by the rollout search, not by backtracing
};

struct PlannerOptions {
  int max_negotiation_depth = 100;
  std::size_t visit_budget = 2'000'000;  // node visits per target
  bool rollback_failed_schemas = false;  // also undo side effects of a schema that failed
  bool validate = true;                  // re-simulate plans with single actions when a model is given
  bool prefer_constrained = false;       // skip targets that need no action at all, if others exist
  bool avoid_negative_reward = false;    // rank plans whose re-simulation hits R- below clean ones
  // When backtracing yields no clean plan and a model is given: breadth-first
  // search over single-action rollouts, merging identical predicted frames.
  bool search_fallback = false;
  std::size_t search_budget = 20'000;    // single-step predictions per search
  // With avoid_negative_reward and a model: a clean plan must leave some
  // rollout that stays free of R- up to the horizon, else it ranks as trapped.
  bool require_escape = false;
  std::size_t escape_budget = 2'000;  // predictions per check; running out counts as escaping
  int max_escape_checks = 4;          // per plan() call; later candidates go unchecked
};

struct PlannerStats {
  std::size_t targets_tried = 0;
  std::size_t invalid_plans = 0;  // backtrace succeeded, re-simulation did not reach the reward
  std::size_t negotiations = 0;
  std::size_t aborted = 0;        // depth cap or visit budget hit
  std::size_t costly_plans = 0;   // valid, but a negative reward is predicted on the way
  std::size_t searched = 0;       // rollout searches started
  std::size_t search_plans = 0;   // plans that came from the rollout search
  std::size_t trapped_plans = 0;  // clean, but every continuation hits R- within the horizon
};

class Planner {
public:
  Planner(FactorGraph& graph, PlannerOptions opts = {});

  /// Reward(+) nodes, ascending layer.
  std::vector<int> select_targets() const;

  bool backtrace_node(int node, int desired_action = -1);
  bool backtrace_schema(int instance);
  bool backtrace_node_by_schemas(int node, std::span<const int> instances);

  /// Fresh marks and constraints, then one backtrace of `target`.
  std::optional<Plan> plan_target(int target);
  /// Tries targets in queue order; with a model, plans failing single-action
  /// re-simulation are skipped.
  std::optional<Plan> plan(const CompiledParams* model = nullptr);

  const JointConstraints& constraints() const { return constraints_; }
  const PlannerStats& stats() const { return stats_; }
  bool aborted() const { return aborted_; }
  /// Instances handed to backtrace_schema since construction.
  const std::vector<std::uint8_t>& evaluated() const { return evaluated_; }
  Reach instance_mark(int instance) const { return inst_reach_[static_cast<std::size_t>(instance)]; }

  /// Clears marks, constraints and the abort flag.
  void reset();

private:
  enum class Undo : std::uint8_t { node_mark, inst_mark, via, constraint };
  struct TrailEntry {
    Undo kind;
    int index;
    int old_value;
    LayerConstraint old_constraint;
  };

  void set_mark(int node, Reach r);
  void set_inst_mark(int inst, Reach r);
  void set_via(int node, int action);
  void set_constraint(int layer, LayerConstraint c);
  void rollback(std::size_t point);
  std::vector<int> schemas_for(int node, int action) const;
  bool has_schemas_for(int node, int action) const;
  Plan extract(int target) const;
  std::optional<Plan> search(const CompiledParams& model);
  bool escapes(const CompiledParams& model, FrameStack frames, int layer);
  bool checks_escape(const CompiledParams* model) const
  {
    return model && opts_.avoid_negative_reward && opts_.require_escape && escape_checks_ < opts_.max_escape_checks;
  }

  FactorGraph& g_;
  PlannerOptions opts_;
  JointConstraints constraints_;
  std::vector<Reach> inst_reach_;
  std::vector<int> via_;  // action used by a reachable node, -1 if none
  std::vector<TrailEntry> trail_;
  std::vector<std::uint8_t> evaluated_;
  PlannerStats stats_;
  int depth_ = 0;
  int escape_checks_ = 0;
  std::size_t visits_ = 0;
  bool aborted_ = false;
};

/// Single-action re-simulation from the graph's observed frames: true iff the
/// positive reward fires exactly at the target layer.
bool plan_valid(const FactorGraph& graph, const CompiledParams& model, const Plan& plan);
bool sequence_reaches(const FactorGraph& graph, const CompiledParams& model, std::span<const int> actions);

struct SequenceOutcome {
  bool reaches = false;     // R+ fires at the last layer
  int negative_before = -1; // first layer where R- fires, -1 if none
};
SequenceOutcome simulate_sequence(const FactorGraph& graph, const CompiledParams& model, std::span<const int> actions);
/// Predicted frames after applying `actions` from the graph's origin.
FrameStack rollout_frames(const FactorGraph& graph, const CompiledParams& model, std::span<const int> actions);

std::optional<Plan> plan(FactorGraph& graph, const PlannerOptions& opts = {}, const CompiledParams* model = nullptr);

}  // namespace dsn

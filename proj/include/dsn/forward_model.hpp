#pragma once

// Multi-step prediction and the layered factor graph built while unrolling.
//
// Layer numbering: layer -1 holds s_{t-1}, layer 0 holds s_t (both observed
// and fixed reachable), layers 1..T are predicted. The action chosen at layer
// t produces layer t+1, so a reward node at layer L needs L actions.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dsn/core.hpp"
#include "dsn/replay.hpp"
#include "dsn/schema.hpp"

namespace dsn {

struct FiredSchema {
  MatrixTag tag;
  std::uint32_t column = 0;
  int entity = 0;
};

struct StepPrediction {
  BitMatrix delta_plus;   // N x M
  BitMatrix delta_minus;  // N x M
  StateMatrix next;
  bool reward_pos = false;
  bool reward_neg = false;
  std::vector<FiredSchema> fired;  // creating, destroying and reward schemas that produced a 1
};

/// Schemas of a ParameterSet pre-split into bit lists for fast evaluation.
class CompiledParams {
public:
  CompiledParams(const ParameterSet& params, const EnvSpec& spec);

  const ParameterSet& params() const { return *params_; }
  const EnvSpec& spec() const { return spec_; }

  struct Schema {
    std::vector<std::uint16_t> bits;  // ascending
    int action = -1;                  // required action, -1 if none
  };
  const std::vector<Schema>& schemas(const MatrixTag& tag) const;
  std::vector<MatrixTag> tags() const { return params_->tags(); }

private:
  const ParameterSet* params_;
  EnvSpec spec_;
  std::vector<std::vector<Schema>> by_tag_;  // canonical tag order
};

/// Planning-mode step: Delta+ and reward under all actions, Delta- under noop.
StepPrediction predict_step(const FrameStack& frames, const CompiledParams& model, bool record_fired = true);
StepPrediction predict_step(const FrameStack& frames, const ParameterSet& params, const EnvSpec& spec);
/// Both deltas and rewards under one concrete action.
StepPrediction predict_action(const FrameStack& frames, const CompiledParams& model, int action,
                              bool record_fired = false);

struct NodeId {
  enum class Kind : std::uint8_t { attribute, reward, action } kind = Kind::attribute;
  int layer = 0;
  int entity = 0;     // attribute nodes
  int attribute = 0;  // attribute nodes
  int sign = 1;       // reward nodes, +1 / -1
  int action = 0;     // action nodes

  bool operator==(const NodeId&) const = default;
  std::string str() const;
};

struct SchemaInstance {
  int output = -1;          // node index
  std::vector<int> inputs;  // node indices
  int required_action = -1;
  MatrixTag tag{MatrixTag::Kind::creating, 0};
  std::uint32_t column = 0;
  int entity = 0;
};

enum class Reach : std::int8_t { unknown = -1, no = 0, yes = 1 };

struct Node {
  NodeId id;
  int self_input = -1;         // node index of the self-transition source
  std::vector<int> schemas;    // instance indices in instantiation order
  Reach reach = Reach::unknown;
};

class FactorGraph {
public:
  FactorGraph() = default;
  FactorGraph(EnvSpec spec, int horizon);

  const EnvSpec& spec() const { return spec_; }
  int horizon() const { return horizon_; }

  int add_attribute(int layer, int entity, int attribute);
  int add_reward(int layer, int sign);
  int add_instance(SchemaInstance inst);
  void set_self(int node, int input);

  /// -1 when the node does not exist. Layers -1..horizon.
  int attribute_node(int layer, int entity, int attribute) const;
  int reward_node(int layer, int sign) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<SchemaInstance>& instances() const { return instances_; }
  const SchemaInstance& instance(int i) const { return instances_[static_cast<std::size_t>(i)]; }

  /// Observed layers are -1 and 0.
  static bool observed(int layer) { return layer <= 0; }
  void reset_marks();

  /// Predicted state per layer (index layer + 1), filled by unroll.
  std::vector<StateMatrix> states;
  /// Observed frames the graph was unrolled from.
  FrameStack origin;

private:
  std::size_t slot(int layer, int entity, int attribute) const;

  EnvSpec spec_;
  int horizon_ = 0;
  std::vector<Node> nodes_;
  std::vector<SchemaInstance> instances_;
  std::vector<int> attr_index_;    // (layer+1, entity, attribute) -> node
  std::vector<int> reward_index_;  // (layer+1, sign) -> node
};

/// Throws ConfigError when horizon < 1.
FactorGraph unroll(const FrameStack& frames, const CompiledParams& model, int horizon);
FactorGraph unroll(const FrameStack& frames, const ParameterSet& params, const EnvSpec& spec, int horizon);

/// Line-oriented text form; parse_graph reads it back (reachability marks and
/// predicted states are not part of the format).
void dump_graph(const FactorGraph& g, std::ostream& os);
FactorGraph parse_graph(std::istream& is);

struct AccuracyReport {
  std::vector<double> per_attribute;  // fraction of correctly predicted cells
  std::vector<std::size_t> errors;    // wrong cells per attribute
  std::size_t cells = 0;              // cells compared per attribute
  double min() const;
  std::string str() const;
};

/// Replays every stored transition with its actual action and compares the
/// predicted next state with the observed one.
AccuracyReport held_out_accuracy(const ReplayBuffer& buffer, const ParameterSet& params);

}  // namespace dsn

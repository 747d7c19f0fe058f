#include "dsn/forward_model.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

#include "dsn/errors.hpp"

namespace dsn {

namespace {

std::size_t tag_slot(const MatrixTag& tag, int m)
{
  switch (tag.kind) {
    case MatrixTag::Kind::creating: return static_cast<std::size_t>(tag.attribute);
    case MatrixTag::Kind::destroying: return static_cast<std::size_t>(m + tag.attribute);
    case MatrixTag::Kind::reward_pos: return static_cast<std::size_t>(2 * m);
    case MatrixTag::Kind::reward_neg: return static_cast<std::size_t>(2 * m + 1);
  }
  return 0;
}

// Augmented matrix stored column-wise: for every augmented bit, the set of
// entities whose row has it. Action columns are handled separately so one
// transposition serves every action selector.
class Columns {
public:
  Columns(const FrameStack& frames, const EnvSpec& spec)
      : spec_(spec), nw_(words_for(static_cast<std::size_t>(spec.entities()))),
        bits_(static_cast<std::size_t>(spec.action_offset()) * nw_, 0), all_(nw_, 0)
  {
    const int n = spec.entities();
    const int m = spec.num_types;
    const int rad = spec.radius();
    const int block = spec.frame_block();
    for (const StateMatrix* s : {&frames.prev, &frames.curr}) {
      if (s->entities() != n || s->attributes() != m) throw ConfigError("frame shape does not match spec");
    }
    for (int e = 0; e < n; ++e) {
      set_bit(all_, static_cast<std::size_t>(e));
      const int er = e / spec.grid_width, ec = e % spec.grid_width;
      int cell = 0;
      for (int dr = -rad; dr <= rad; ++dr) {
        for (int dc = -rad; dc <= rad; ++dc, ++cell) {
          const int r = er + dr, c = ec + dc;
          if (r < 0 || r >= spec.grid_height || c < 0 || c >= spec.grid_width) continue;
          const int nb = r * spec.grid_width + c;
          for (int f = 0; f < 2; ++f) {
            Word w = (f ? frames.curr : frames.prev).row_word(nb);
            while (w) {
              int j = std::countr_zero(w);
              w &= w - 1;
              std::size_t col = static_cast<std::size_t>(f * block + cell * m + j);
              set_bit(std::span<Word>(bits_.data() + col * nw_, nw_), static_cast<std::size_t>(e));
            }
          }
        }
      }
    }
  }

  std::size_t words() const { return nw_; }

  // Entities on which the schema fires; `action` < 0 means all actions are
  // superimposed.
  bool eval(const CompiledParams::Schema& s, int action, Word* out) const
  {
    if (s.action >= 0 && action >= 0 && s.action != action) return false;
    std::copy(all_.begin(), all_.end(), out);
    const std::size_t off = static_cast<std::size_t>(spec_.action_offset());
    for (auto b : s.bits) {
      if (b >= off) continue;
      const Word* col = bits_.data() + static_cast<std::size_t>(b) * nw_;
      Word acc = 0;
      for (std::size_t i = 0; i < nw_; ++i) acc |= (out[i] &= col[i]);
      if (!acc) return false;
    }
    return true;
  }

private:
  const EnvSpec& spec_;
  std::size_t nw_;
  std::vector<Word> bits_;
  std::vector<Word> all_;
};

StepPrediction predict(const FrameStack& frames, const CompiledParams& model, int plus_action, int minus_action,
                       bool record)
{
  const EnvSpec& spec = model.spec();
  const int n = spec.entities();
  const int m = spec.num_types;
  Columns cols(frames, spec);
  StepPrediction out{BitMatrix(n, m), BitMatrix(n, m), frames.curr, false, false, {}};
  std::vector<Word> hit(cols.words());

  for (const MatrixTag& tag : model.tags()) {
    const bool plus = tag.kind != MatrixTag::Kind::destroying;
    const int action = plus ? plus_action : minus_action;
    const auto& list = model.schemas(tag);
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (!cols.eval(list[k], action, hit.data())) continue;
      for_each_set_bit(hit, [&](std::size_t e) {
        // Attribute schemas only speak for the entities they were trained on:
        // creation where the attribute is absent, destruction where present.
        if (tag.kind == MatrixTag::Kind::creating || tag.kind == MatrixTag::Kind::destroying) {
          const bool present = frames.curr.get(static_cast<int>(e), tag.attribute);
          if (present == (tag.kind == MatrixTag::Kind::creating)) return;
        }
        switch (tag.kind) {
          case MatrixTag::Kind::creating: out.delta_plus.set(e, static_cast<std::size_t>(tag.attribute)); break;
          case MatrixTag::Kind::destroying: out.delta_minus.set(e, static_cast<std::size_t>(tag.attribute)); break;
          case MatrixTag::Kind::reward_pos: out.reward_pos = true; break;
          case MatrixTag::Kind::reward_neg: out.reward_neg = true; break;
        }
        if (record) out.fired.push_back({tag, static_cast<std::uint32_t>(k), static_cast<int>(e)});
      });
    }
  }
  out.next = StateMatrix(next_state(frames.curr.bits(), out.delta_plus, out.delta_minus));
  return out;
}

}  // namespace

CompiledParams::CompiledParams(const ParameterSet& params, const EnvSpec& spec) : params_(&params), spec_(spec)
{
  if (params.row_length() != static_cast<std::size_t>(spec.row_length()))
    throw ConfigError("parameter row length " + std::to_string(params.row_length()) +
                      " does not match the layout's " + std::to_string(spec.row_length()));
  if (params.num_types() != spec.num_types) throw ConfigError("parameter attribute count does not match spec");
  auto tags = params.tags();
  by_tag_.resize(tags.size());
  for (const MatrixTag& tag : tags) {
    auto& list = by_tag_[tag_slot(tag, spec.num_types)];
    const SchemaMatrix& mat = params.matrix(tag);
    for (std::size_t i = 0; i < mat.size(); ++i) {
      Schema s;
      for_each_set_bit(mat.column(i), [&](std::size_t b) {
        s.bits.push_back(static_cast<std::uint16_t>(b));
        if (static_cast<int>(b) >= spec.action_offset()) {
          if (s.action >= 0) throw ConfigError("schema " + tag.str() + "#" + std::to_string(i) + " requires two actions");
          s.action = static_cast<int>(b) - spec.action_offset();
        }
      });
      list.push_back(std::move(s));
    }
  }
}

const std::vector<CompiledParams::Schema>& CompiledParams::schemas(const MatrixTag& tag) const
{
  return by_tag_.at(tag_slot(tag, spec_.num_types));
}

StepPrediction predict_step(const FrameStack& frames, const CompiledParams& model, bool record_fired)
{
  return predict(frames, model, -1, 0, record_fired);
}

StepPrediction predict_step(const FrameStack& frames, const ParameterSet& params, const EnvSpec& spec)
{
  CompiledParams model(params, spec);
  return predict_step(frames, model, true);
}

StepPrediction predict_action(const FrameStack& frames, const CompiledParams& model, int action, bool record_fired)
{
  if (action < 0 || action >= model.spec().num_actions) throw ConfigError("action id out of range");
  return predict(frames, model, action, action, record_fired);
}

std::string NodeId::str() const
{
  std::ostringstream os;
  switch (kind) {
    case Kind::attribute: os << "attr(L" << layer << ",e" << entity << ",j" << attribute << ")"; break;
    case Kind::reward: os << "reward" << (sign > 0 ? '+' : '-') << "(L" << layer << ")"; break;
    case Kind::action: os << "action" << action << "(L" << layer << ")"; break;
  }
  return os.str();
}

FactorGraph::FactorGraph(EnvSpec spec, int horizon)
    : spec_(spec), horizon_(horizon),
      attr_index_(static_cast<std::size_t>(horizon + 2) * static_cast<std::size_t>(spec.entities() * spec.num_types), -1),
      reward_index_(static_cast<std::size_t>(horizon + 2) * 2, -1)
{
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
}

std::size_t FactorGraph::slot(int layer, int entity, int attribute) const
{
  if (layer < -1 || layer > horizon_ || entity < 0 || entity >= spec_.entities() || attribute < 0 ||
      attribute >= spec_.num_types)
    throw ContractViolation("node coordinates out of range");
  return (static_cast<std::size_t>(layer + 1) * static_cast<std::size_t>(spec_.entities()) +
          static_cast<std::size_t>(entity)) *
             static_cast<std::size_t>(spec_.num_types) +
         static_cast<std::size_t>(attribute);
}

int FactorGraph::add_attribute(int layer, int entity, int attribute)
{
  int& idx = attr_index_[slot(layer, entity, attribute)];
  if (idx >= 0) return idx;
  idx = static_cast<int>(nodes_.size());
  Node n;
  n.id = NodeId{NodeId::Kind::attribute, layer, entity, attribute, 1, 0};
  n.reach = observed(layer) ? Reach::yes : Reach::unknown;
  nodes_.push_back(std::move(n));
  return idx;
}

int FactorGraph::add_reward(int layer, int sign)
{
  if (layer < 1 || layer > horizon_) throw ContractViolation("reward layer out of range");
  int& idx = reward_index_[static_cast<std::size_t>(layer + 1) * 2 + (sign > 0 ? 0 : 1)];
  if (idx >= 0) return idx;
  idx = static_cast<int>(nodes_.size());
  Node n;
  n.id = NodeId{NodeId::Kind::reward, layer, 0, 0, sign > 0 ? 1 : -1, 0};
  nodes_.push_back(std::move(n));
  return idx;
}

int FactorGraph::add_instance(SchemaInstance inst)
{
  const Node& out = node(inst.output);
  for (int in : inst.inputs) {
    if (node(in).id.layer >= out.id.layer) throw ContractViolation("schema input not earlier than its output");
  }
  int idx = static_cast<int>(instances_.size());
  nodes_[static_cast<std::size_t>(inst.output)].schemas.push_back(idx);
  instances_.push_back(std::move(inst));
  return idx;
}

void FactorGraph::set_self(int node_idx, int input)
{
  if (node(input).id.layer + 1 != node(node_idx).id.layer) throw ContractViolation("self-transition must span one layer");
  node(node_idx).self_input = input;
}

int FactorGraph::attribute_node(int layer, int entity, int attribute) const
{
  if (layer < -1 || layer > horizon_) return -1;
  return attr_index_[slot(layer, entity, attribute)];
}

int FactorGraph::reward_node(int layer, int sign) const
{
  if (layer < 1 || layer > horizon_) return -1;
  return reward_index_[static_cast<std::size_t>(layer + 1) * 2 + (sign > 0 ? 0 : 1)];
}

void FactorGraph::reset_marks()
{
  for (Node& n : nodes_) n.reach = observed(n.id.layer) ? Reach::yes : Reach::unknown;
}

FactorGraph unroll(const FrameStack& frames, const CompiledParams& model, int horizon)
{
  const EnvSpec& spec = model.spec();
  FactorGraph g(spec, horizon);
  g.origin = frames;
  g.states = {frames.prev, frames.curr};
  const int n = spec.entities();
  const int m = spec.num_types;
  const int offset = spec.action_offset();

  for (int layer = -1; layer <= 0; ++layer)
    for (int e = 0; e < n; ++e)
      for (int j = 0; j < m; ++j)
        if (g.states[static_cast<std::size_t>(layer + 1)].get(e, j)) g.add_attribute(layer, e, j);

  for (int t = 0; t < horizon; ++t) {
    const StateMatrix& prev = g.states[static_cast<std::size_t>(t)];
    const StateMatrix& curr = g.states[static_cast<std::size_t>(t + 1)];
    StepPrediction p = predict_step(FrameStack{prev, curr}, model, true);

    for (int e = 0; e < n; ++e) {
      for (int j = 0; j < m; ++j) {
        if (!p.next.get(e, j)) continue;
        int node = g.add_attribute(t + 1, e, j);
        if (curr.get(e, j) && !p.delta_minus.get(e, j)) g.set_self(node, g.attribute_node(t, e, j));
      }
    }
    int reward_nodes[2] = {-1, -1};
    if (p.reward_pos) reward_nodes[0] = g.add_reward(t + 1, 1);
    if (p.reward_neg) reward_nodes[1] = g.add_reward(t + 1, -1);

    for (const FiredSchema& f : p.fired) {
      SchemaInstance inst;
      switch (f.tag.kind) {
        case MatrixTag::Kind::creating: inst.output = g.attribute_node(t + 1, f.entity, f.tag.attribute); break;
        case MatrixTag::Kind::reward_pos: inst.output = reward_nodes[0]; break;
        case MatrixTag::Kind::reward_neg: inst.output = reward_nodes[1]; break;
        case MatrixTag::Kind::destroying: continue;
      }
      const auto& s = model.schemas(f.tag)[f.column];
      inst.required_action = s.action;
      inst.tag = f.tag;
      inst.column = f.column;
      inst.entity = f.entity;
      for (auto b : s.bits) {
        if (b >= offset) continue;
        BitMeaning bm = decode_bit(spec, b);
        int nb = f.entity + bm.dr * spec.grid_width + bm.dc;
        int layer = bm.kind == BitMeaning::Kind::prev_attr ? t - 1 : t;
        int in = g.attribute_node(layer, nb, bm.attribute);
        if (in < 0) throw ContractViolation("fired schema input missing from the graph");
        inst.inputs.push_back(in);
      }
      g.add_instance(std::move(inst));
    }
    g.states.push_back(std::move(p.next));
  }
  return g;
}

FactorGraph unroll(const FrameStack& frames, const ParameterSet& params, const EnvSpec& spec, int horizon)
{
  CompiledParams model(params, spec);
  return unroll(frames, model, horizon);
}

void dump_graph(const FactorGraph& g, std::ostream& os)
{
  const EnvSpec& s = g.spec();
  os << "dsn-graph v1\n";
  os << "spec " << s.grid_width << ' ' << s.grid_height << ' ' << s.num_types << ' ' << s.num_actions << ' '
     << s.window_side << ' ' << g.horizon() << '\n';
  for (std::size_t i = 0; i < g.size(); ++i) {
    const NodeId& id = g.node(static_cast<int>(i)).id;
    if (id.kind == NodeId::Kind::attribute)
      os << "node " << i << " attr " << id.layer << ' ' << id.entity << ' ' << id.attribute << '\n';
    else if (id.kind == NodeId::Kind::reward)
      os << "node " << i << " reward " << id.layer << ' ' << (id.sign > 0 ? '+' : '-') << '\n';
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    int in = g.node(static_cast<int>(i)).self_input;
    if (in >= 0) os << "trans " << i << ' ' << in << '\n';
  }
  for (const SchemaInstance& inst : g.instances()) {
    os << "schema " << inst.output << ' ';
    if (inst.required_action >= 0)
      os << inst.required_action;
    else
      os << '-';
    os << ' ' << inst.tag.str() << ' ' << inst.column << ' ' << inst.entity;
    for (int in : inst.inputs) os << ' ' << in;
    os << '\n';
  }
}

FactorGraph parse_graph(std::istream& is)
{
  std::string line;
  auto fail = [&](const std::string& why) { throw ConfigError("graph dump: " + why + " in line '" + line + "'"); };
  if (!std::getline(is, line) || line != "dsn-graph v1") fail("missing header");
  if (!std::getline(is, line)) fail("missing spec");
  std::istringstream sl(line);
  std::string word;
  EnvSpec spec;
  int horizon = 0;
  if (!(sl >> word >> spec.grid_width >> spec.grid_height >> spec.num_types >> spec.num_actions >> spec.window_side >>
        horizon) ||
      word != "spec")
    fail("bad spec");
  spec.validate();
  FactorGraph g(spec, horizon);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ls >> word;
    if (word == "node") {
      std::size_t idx = 0;
      std::string kind;
      int layer = 0;
      ls >> idx >> kind >> layer;
      if (!ls || idx != g.size()) fail("node ids must be dense and ascending");
      if (kind == "attr") {
        int e = 0, j = 0;
        if (!(ls >> e >> j)) fail("bad attribute node");
        g.add_attribute(layer, e, j);
      } else if (kind == "reward") {
        std::string sign;
        if (!(ls >> sign) || (sign != "+" && sign != "-")) fail("bad reward sign");
        g.add_reward(layer, sign == "+" ? 1 : -1);
      } else {
        fail("unknown node kind");
      }
      if (g.size() != idx + 1) fail("duplicate node");
    } else if (word == "trans") {
      int out = 0, in = 0;
      if (!(ls >> out >> in) || out < 0 || in < 0 || static_cast<std::size_t>(std::max(out, in)) >= g.size())
        fail("bad self-transition");
      g.set_self(out, in);
    } else if (word == "schema") {
      SchemaInstance inst;
      std::string act, tag;
      if (!(ls >> inst.output >> act >> tag >> inst.column >> inst.entity)) fail("bad schema header");
      if (inst.output < 0 || static_cast<std::size_t>(inst.output) >= g.size()) fail("schema output out of range");
      inst.required_action = act == "-" ? -1 : std::stoi(act);
      inst.tag = MatrixTag::parse(tag);
      int in = 0;
      while (ls >> in) {
        if (in < 0 || static_cast<std::size_t>(in) >= g.size()) fail("schema input out of range");
        inst.inputs.push_back(in);
      }
      g.add_instance(std::move(inst));
    } else {
      fail("unknown record");
    }
  }
  return g;
}

double AccuracyReport::min() const
{
  double v = 1.0;
  for (double a : per_attribute) v = std::min(v, a);
  return v;
}

std::string AccuracyReport::str() const
{
  std::ostringstream os;
  for (std::size_t j = 0; j < per_attribute.size(); ++j)
    os << (j ? " " : "") << "attr" << j << "=" << per_attribute[j] << " (" << errors[j] << " wrong)";
  return os.str();
}

AccuracyReport held_out_accuracy(const ReplayBuffer& buffer, const ParameterSet& params)
{
  const EnvSpec& spec = buffer.spec();
  CompiledParams model(params, spec);
  const int m = spec.num_types;
  AccuracyReport rep;
  rep.errors.assign(static_cast<std::size_t>(m), 0);
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    Transition t = buffer.at(i);
    StepPrediction p = predict_action(t.frames, model, t.action);
    for (int e = 0; e < spec.entities(); ++e) {
      Word diff = p.next.row_word(e) ^ t.next.row_word(e);
      for (int j = 0; j < m; ++j) rep.errors[static_cast<std::size_t>(j)] += (diff >> j) & 1U;
    }
    rep.cells += static_cast<std::size_t>(spec.entities());
  }
  for (int j = 0; j < m; ++j)
    rep.per_attribute.push_back(rep.cells ? 1.0 - static_cast<double>(rep.errors[static_cast<std::size_t>(j)]) /
                                                     static_cast<double>(rep.cells)
                                          : 1.0);
  return rep;
}

}  // namespace dsn

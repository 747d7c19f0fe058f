#include "support/fuzz.hpp"

#include <algorithm>

namespace dsn::fuzz {

EnvSpec strip_spec()
{
  EnvSpec s;
  s.grid_width = 5;
  s.grid_height = 1;
  s.num_types = 4;
  s.num_actions = 3;
  s.window_side = 3;
  return s;
}

ParameterSet random_params(const EnvSpec& s, std::mt19937_64& rng)
{
  ParameterSet p(s.num_types, static_cast<std::size_t>(s.row_length()));
  const int attr_bits = s.action_offset();
  for (const MatrixTag& tag : p.tags()) {
    const bool reward = tag.kind == MatrixTag::Kind::reward_pos || tag.kind == MatrixTag::Kind::reward_neg;
    const int k = static_cast<int>(rng() % (reward ? 3 : 4));
    for (int i = 0; i < k; ++i) {
      std::vector<int> bits;
      const int lits = 1 + static_cast<int>(rng() % (reward ? 2 : 3));
      for (int l = 0; l < lits; ++l) bits.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(attr_bits)));
      if (rng() % 2) bits.push_back(encode_action_bit(s, static_cast<int>(rng() % 3)));
      std::sort(bits.begin(), bits.end());
      bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
      p.matrix(tag).add(SchemaVector::from_indices(static_cast<std::size_t>(s.row_length()), bits));
    }
  }
  return p;
}

StateMatrix random_state(const EnvSpec& s, std::mt19937_64& rng)
{
  std::vector<std::uint8_t> t(static_cast<std::size_t>(s.entities()));
  for (auto& x : t) x = static_cast<std::uint8_t>(rng() % static_cast<std::uint64_t>(s.num_types));
  return StateMatrix::from_types(t, s.num_types);
}

bool continuation_free(const CompiledParams& m, const FrameStack& f, int layer, int horizon)
{
  if (layer == horizon) return true;
  for (int a = 0; a < m.spec().num_actions; ++a) {
    StepPrediction p = predict_action(f, m, a);
    if (!p.reward_neg && continuation_free(m, FrameStack{f.curr, p.next}, layer + 1, horizon)) return true;
  }
  return false;
}

namespace {

void explore(const CompiledParams& m, const FrameStack& f, int layer, int horizon, bool dirty,
             const FactorGraph* g, Exhaustive& out)
{
  if (layer == horizon) return;
  for (int a = 0; a < m.spec().num_actions; ++a) {
    StepPrediction p = predict_action(f, m, a);
    const bool d = dirty || p.reward_neg;
    FrameStack n{f.curr, p.next};
    if (p.reward_pos) {
      out.any = true;
      out.queued = out.queued || (g && g->reward_node(layer + 1, 1) >= 0);
      if (!d) {
        out.clean = true;
        out.escape = out.escape || continuation_free(m, n, layer + 1, horizon);
      }
    }
    explore(m, n, layer + 1, horizon, d, g, out);
  }
}

}  // namespace

Exhaustive enumerate(const CompiledParams& m, const FrameStack& frames, int horizon, const FactorGraph* graph)
{
  Exhaustive out;
  explore(m, frames, 0, horizon, false, graph, out);
  return out;
}

}  // namespace dsn::fuzz

#pragma once

// Hand-rolled generators and exhaustive rollout enumeration shared by the
// planner tests and the acceptance suite.

#include <random>

#include "dsn/forward_model.hpp"

namespace dsn::fuzz {

/// 5x1 strip, four types, noop/left/right, 3-wide window.
EnvSpec strip_spec();

/// A few short conjunctions per matrix; reward schemas have at most two
/// attribute literals so rewards fire often enough to be interesting.
ParameterSet random_params(const EnvSpec& s, std::mt19937_64& rng);
StateMatrix random_state(const EnvSpec& s, std::mt19937_64& rng);

struct Exhaustive {
  bool any = false;     // some sequence fires R+ at its last layer
  bool clean = false;   // ... with no R- on the way or at that layer
  bool escape = false;  // ... and some continuation stays R- free to the horizon
  bool queued = false;  // some sequence fires R+ at a layer holding a graph reward(+) node
};

/// Every single-action sequence of length <= horizon from `frames`.
Exhaustive enumerate(const CompiledParams& m, const FrameStack& frames, int horizon,
                     const FactorGraph* graph = nullptr);
/// Some R--free continuation from `layer` up to `horizon` exists.
bool continuation_free(const CompiledParams& m, const FrameStack& f, int layer, int horizon);

}  // namespace dsn::fuzz

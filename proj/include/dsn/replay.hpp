#pragma once

// Deduplicated store of observed transitions.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <unordered_set>

#include "dsn/core.hpp"

namespace dsn {

struct Transition {
  FrameStack frames;  // s_{t-1}, s_t
  int action = 0;
  StateMatrix next;   // s_{t+1}
  int reward = 0;
};

/// Append-only; a transition is stored once no matter how often it is seen.
/// States are kept as per-cell type ids, so every matrix must be one-hot.
class ReplayBuffer {
public:
  explicit ReplayBuffer(EnvSpec spec);

  /// Returns false for a duplicate. Throws ConfigError for a non-conformant
  /// transition and ContractViolation for a state that is not one-hot.
  bool insert(const Transition& t);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const EnvSpec& spec() const { return spec_; }

  Transition at(std::size_t i) const;
  int action(std::size_t i) const;
  int reward(std::size_t i) const;
  /// Type id of entity e in frame k (0 = prev, 1 = curr, 2 = next).
  std::uint8_t type(std::size_t i, int frame, int e) const;

private:
  EnvSpec spec_;
  std::deque<std::string> records_;
  std::unordered_set<std::string_view> index_;
};

}  // namespace dsn

#pragma once

// Binary state representation and augmented-matrix construction.
//
// Augmented row layout (length D = 2*M*R + A):
//   [ prev-frame window | curr-frame window | action one-hot ]
// Each window block holds R cells in row-major window order, each cell
// contributing M contiguous attribute bits. Off-grid cells are all zero.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dsn/bits.hpp"

namespace dsn {

struct EnvSpec {
  int grid_width = 1;
  int grid_height = 1;
  int num_types = 2;    // M, void included
  int num_actions = 1;  // |A|
  int window_side = 3;

  int entities() const { return grid_width * grid_height; }
  int window_cells() const { return window_side * window_side; }
  int frame_block() const { return num_types * window_cells(); }
  int row_length() const { return 2 * frame_block() + num_actions; }
  int action_offset() const { return 2 * frame_block(); }
  int radius() const { return window_side / 2; }

  /// Throws ConfigError on a violated invariant.
  void validate() const;

  bool operator==(const EnvSpec&) const = default;
};

/// What a single augmented-row bit refers to.
struct BitMeaning {
  enum class Kind { prev_attr, curr_attr, action } kind;
  int dr = 0;  // window offset, rows
  int dc = 0;  // window offset, cols
  int attribute = 0;
  int action = 0;
};

BitMeaning decode_bit(const EnvSpec& spec, int bit);
int encode_attr_bit(const EnvSpec& spec, bool curr_frame, int dr, int dc, int attribute);
inline int encode_action_bit(const EnvSpec& spec, int action) { return spec.action_offset() + action; }

/// N x M binary matrix, one row per entity (row-major over the grid).
class StateMatrix {
public:
  StateMatrix() = default;
  StateMatrix(int entities, int attributes) : bits_(entities, attributes) {}
  explicit StateMatrix(BitMatrix bits) : bits_(std::move(bits)) {}

  /// One-hot encoding of a per-entity type map.
  static StateMatrix from_types(std::span<const std::uint8_t> types, int num_types);

  int entities() const { return static_cast<int>(bits_.rows()); }
  int attributes() const { return static_cast<int>(bits_.cols()); }

  bool get(int e, int j) const { return bits_.get(e, j); }
  void set(int e, int j, bool v = true) { bits_.set(e, j, v); }

  /// Attribute bits of entity e packed into one word (M <= 64).
  Word row_word(int e) const { return bits_.row(e)[0]; }

  /// Exactly one attribute set in every row.
  bool is_one_hot() const;

  const BitMatrix& bits() const { return bits_; }
  BitMatrix& bits() { return bits_; }

  bool operator==(const StateMatrix&) const = default;

private:
  BitMatrix bits_;
};

struct FrameStack {
  StateMatrix prev;
  StateMatrix curr;
};

class ActionSelector {
public:
  static ActionSelector single(int action) { return ActionSelector(action); }
  static ActionSelector all_actions() { return ActionSelector(std::nullopt); }

  bool is_all() const { return !action_; }
  int action() const { return *action_; }

private:
  explicit ActionSelector(std::optional<int> a) : action_(a) {}
  std::optional<int> action_;
};

/// Builds X_t (N x D). Throws ConfigError when the frames do not match spec.
BitMatrix build_augmented(const FrameStack& frames, ActionSelector sel, const EnvSpec& spec);

}  // namespace dsn

#pragma once

// Deterministic grid Breakout emitting typed-pixel observations.

#include <cstdint>
#include <string>
#include <vector>

#include "dsn/core.hpp"

namespace dsn {

enum class ObjectType : std::uint8_t { void_ = 0, wall = 1, brick = 2, paddle = 3, ball = 4 };
inline constexpr int kNumObjectTypes = 5;

enum Action : int { noop = 0, left = 1, right = 2 };
inline constexpr int kNumActions = 3;

struct BreakoutConfig {
  int width = 15;
  int height = 12;
  int brick_row_first = 2;
  int brick_row_last = 4;
  int brick_col_first = 1;
  int brick_col_last = 12;
  int paddle_width = 3;
  int lives = 3;
  int max_steps = 5000;
  int num_balls = 1;

  int brick_count() const
  {
    return (brick_row_last - brick_row_first + 1) * (brick_col_last - brick_col_first + 1);
  }
  // The bottom row is a floor wall so the paddle row is visible from above.
  int paddle_row() const { return height - 2; }
  /// Throws ConfigError on invalid geometry.
  void validate() const;
  EnvSpec env_spec(int window_side) const;
};

struct Ball {
  int row = 0;
  int col = 0;
  int vel_row = -1;
  int vel_col = 1;
  bool resting = false;  // lying on the bottom row after a drop
};

struct BreakoutState {
  int paddle_left = 1;
  std::vector<Ball> balls;
  std::vector<char> brick_alive;  // row-major over the brick region
  int lives = 0;
  int step = 0;
  int bricks_destroyed = 0;
  int balls_dropped = 0;
};

struct Observation {
  std::vector<std::uint8_t> type_map;  // ObjectType per cell, row-major
  int reward = 0;
  bool done = false;
};

class Breakout {
public:
  explicit Breakout(BreakoutConfig config);

  Observation reset(std::uint64_t seed);
  /// Throws ContractViolation if the episode is already done.
  Observation step(int action);

  const BreakoutState& state() const { return state_; }
  const BreakoutConfig& config() const { return config_; }
  bool done() const { return done_; }

  std::vector<std::uint8_t> type_map() const;
  std::string render_ascii() const;

private:
  bool is_wall(int r, int c) const;
  int brick_index(int r, int c) const;  // -1 outside region
  bool brick_at(int r, int c) const;
  bool blocked(int r, int c) const;
  bool paddle_covers(int paddle_left, int c) const;
  int advance_ball(Ball& b, int paddle_left, int dx, bool& dropped);

  BreakoutConfig config_;
  BreakoutState state_;
  bool done_ = true;
};

char object_char(ObjectType t);
std::string render_type_map(const std::vector<std::uint8_t>& types, int width);

}  // namespace dsn

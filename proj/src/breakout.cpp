#include "dsn/breakout.hpp"

#include <algorithm>
#include <random>

#include "dsn/errors.hpp"

namespace dsn {

void BreakoutConfig::validate() const
{
  if (width < 5 || height < 6) throw ConfigError("grid must be at least 5 wide and 6 high");
  if (paddle_width < 1 || paddle_width > width - 2) throw ConfigError("paddle does not fit between walls");
  if (brick_row_first < 1 || brick_row_last < brick_row_first || brick_row_last >= height - 4)
    throw ConfigError("brick rows must lie below the top wall and leave room above the paddle");
  if (brick_col_first < 1 || brick_col_last < brick_col_first || brick_col_last > width - 2)
    throw ConfigError("brick columns must lie between the walls");
  if (lives < 1) throw ConfigError("lives must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (num_balls != 1 && num_balls != 2) throw ConfigError("num_balls must be 1 or 2");
}

EnvSpec BreakoutConfig::env_spec(int window_side) const
{
  EnvSpec s;
  s.grid_width = width;
  s.grid_height = height;
  s.num_types = kNumObjectTypes;
  s.num_actions = kNumActions;
  s.window_side = window_side;
  s.validate();
  return s;
}

Breakout::Breakout(BreakoutConfig config) : config_(config) { config_.validate(); }

bool Breakout::is_wall(int r, int c) const
{
  return r <= 0 || r >= config_.height - 1 || c <= 0 || c >= config_.width - 1;
}

int Breakout::brick_index(int r, int c) const
{
  if (r < config_.brick_row_first || r > config_.brick_row_last || c < config_.brick_col_first ||
      c > config_.brick_col_last)
    return -1;
  const int cols = config_.brick_col_last - config_.brick_col_first + 1;
  return (r - config_.brick_row_first) * cols + (c - config_.brick_col_first);
}

bool Breakout::brick_at(int r, int c) const
{
  int i = brick_index(r, c);
  return i >= 0 && state_.brick_alive[i];
}

bool Breakout::blocked(int r, int c) const { return is_wall(r, c) || brick_at(r, c); }

bool Breakout::paddle_covers(int paddle_left, int c) const
{
  return c >= paddle_left && c < paddle_left + config_.paddle_width;
}

Observation Breakout::reset(std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  const int max_left = config_.width - 1 - config_.paddle_width;
  state_ = BreakoutState{};
  state_.paddle_left = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_left));
  const int dir = (rng() & 1U) ? 1 : -1;
  const int center = state_.paddle_left + config_.paddle_width / 2;
  state_.balls.push_back(Ball{config_.paddle_row() - 1, center, -1, dir, false});
  if (config_.num_balls == 2) {
    int col = std::clamp(center - 3 * dir, 1, config_.width - 2);
    state_.balls.push_back(Ball{config_.paddle_row() - 4, col, -1, -dir, false});
  }
  state_.brick_alive.assign(config_.brick_count(), 1);
  state_.lives = config_.lives;
  done_ = false;
  return Observation{type_map(), 0, false};
}

// Returns the reward produced by this ball. Contact is judged from the
// pre-move paddle plus the move direction: the ball is caught if the paddle
// is within one column of it, or if the paddle slides under its landing
// column this step. A dropped ball therefore never lands under the paddle.
// Collision order: paddle, bricks, walls; at most one brick is destroyed
// (lowest row, then column).
int Breakout::advance_ball(Ball& b, int paddle_left, int dx, bool& dropped)
{
  dropped = false;
  const int prow = config_.paddle_row();
  if (b.resting) {
    bool left_side = paddle_covers(paddle_left, b.col - 1);
    if (left_side || paddle_covers(paddle_left, b.col) || paddle_covers(paddle_left, b.col + 1)) {
      b.resting = false;
      b.vel_row = -1;
      b.vel_col = left_side ? 1 : -1;
      if (is_wall(prow - 1, b.col + b.vel_col)) b.vel_col = -b.vel_col;
      b.row = prow - 1;
      b.col += b.vel_col;
    }
    return 0;
  }

  const int r = b.row;
  const int c = b.col;
  const int entry_vr = b.vel_row;
  const int entry_vc = b.vel_col;
  int vr = b.vel_row;
  int vc = b.vel_col;

  if (vr == 1 && r == prow - 1) {
    int land = c + vc;
    if (is_wall(prow, land)) land = c - vc;
    int under = -1;  // paddle cell offset below the landing column
    if (paddle_covers(paddle_left, land))
      under = land - paddle_left;
    else if (dx != 0 && paddle_covers(paddle_left, land - dx))
      under = land - dx - paddle_left;
    const bool edge = paddle_covers(paddle_left, c - 1) || paddle_covers(paddle_left, c) ||
                      paddle_covers(paddle_left, c + 1);
    if (under >= 0) {
      // Left third sends the ball left, right third right, centre keeps it.
      vr = -1;
      const int third = config_.paddle_width / 3;
      if (under < third)
        vc = -1;
      else if (under >= config_.paddle_width - third)
        vc = 1;
    } else if (edge) {
      // Trailing-edge catch: back the way it came.
      vr = -1;
      vc = -vc;
    } else {
      b.row = prow;
      b.col = land;
      b.vel_col = land - c;
      b.resting = true;
      dropped = true;
      return -1;
    }
  }

  const bool side_brick = brick_at(r, c + vc);
  const bool vert_brick = brick_at(r + vr, c);
  const bool side_wall = is_wall(r, c + vc);
  const bool vert_wall = is_wall(r + vr, c);
  const bool straight = side_brick || vert_brick || side_wall || vert_wall;
  const bool diag_brick = !straight && brick_at(r + vr, c + vc);
  const bool diag_wall = !straight && is_wall(r + vr, c + vc);

  int reward = 0;
  int hit_r = -1, hit_c = -1;
  auto consider = [&](bool hit, int rr, int cc) {
    if (!hit) return;
    if (hit_r < 0 || rr < hit_r || (rr == hit_r && cc < hit_c)) {
      hit_r = rr;
      hit_c = cc;
    }
  };
  consider(side_brick, r, c + vc);
  consider(vert_brick, r + vr, c);
  consider(diag_brick, r + vr, c + vc);
  if (hit_r >= 0) {
    state_.brick_alive[brick_index(hit_r, hit_c)] = 0;
    ++state_.bricks_destroyed;
    reward = 1;
  }

  int nvr = vr;
  int nvc = vc;
  if (hit_r >= 0) nvr = -vr;
  if (side_wall) nvc = -vc;
  if (vert_wall) nvr = -vr;
  if (diag_wall) {
    nvr = -vr;
    nvc = -vc;
  }
  if (blocked(r + nvr, c + nvc)) {
    nvr = -entry_vr;
    nvc = -entry_vc;
  }
  vr = nvr;
  vc = nvc;
  b.row = r + vr;
  b.col = c + vc;
  b.vel_row = vr;
  b.vel_col = vc;
  return reward;
}

Observation Breakout::step(int action)
{
  if (done_) throw ContractViolation("step() called on a finished episode");
  if (action < 0 || action >= kNumActions) throw ContractViolation("unknown action");

  const int before = state_.paddle_left;
  const int dx = action == left ? -1 : action == right ? 1 : 0;
  const int max_left = config_.width - 1 - config_.paddle_width;

  const int after = std::clamp(before + dx, 1, max_left);
  int reward = 0;
  for (std::size_t i = 0; i < state_.balls.size();) {
    bool dropped = false;
    reward += advance_ball(state_.balls[i], before, dx, dropped);
    if (dropped) {
      --state_.lives;
      ++state_.balls_dropped;
      bool others_in_play = false;
      for (std::size_t k = 0; k < state_.balls.size(); ++k)
        others_in_play = others_in_play || (k != i && !state_.balls[k].resting);
      if (others_in_play) {
        state_.balls.erase(state_.balls.begin() + static_cast<std::ptrdiff_t>(i));
        continue;
      }
    }
    ++i;
  }
  state_.paddle_left = after;
  ++state_.step;

  done_ = state_.lives <= 0 || state_.bricks_destroyed == config_.brick_count() || state_.step >= config_.max_steps;
  return Observation{type_map(), reward, done_};
}

std::vector<std::uint8_t> Breakout::type_map() const
{
  const int w = config_.width;
  std::vector<std::uint8_t> t(static_cast<std::size_t>(w * config_.height), 0);
  auto put = [&](int r, int c, ObjectType ty) {
    auto& cell = t[static_cast<std::size_t>(r * w + c)];
    cell = std::max(cell, static_cast<std::uint8_t>(ty));
  };
  for (int r = 0; r < config_.height; ++r)
    for (int c = 0; c < w; ++c)
      if (is_wall(r, c)) put(r, c, ObjectType::wall);
  for (int r = config_.brick_row_first; r <= config_.brick_row_last; ++r)
    for (int c = config_.brick_col_first; c <= config_.brick_col_last; ++c)
      if (brick_at(r, c)) put(r, c, ObjectType::brick);
  for (int k = 0; k < config_.paddle_width; ++k) put(config_.paddle_row(), state_.paddle_left + k, ObjectType::paddle);
  for (const Ball& b : state_.balls) put(b.row, b.col, ObjectType::ball);
  return t;
}

char object_char(ObjectType t)
{
  switch (t) {
    case ObjectType::void_: return '.';
    case ObjectType::wall: return '#';
    case ObjectType::brick: return '=';
    case ObjectType::paddle: return '_';
    case ObjectType::ball: return 'o';
  }
  return '?';
}

std::string render_type_map(const std::vector<std::uint8_t>& types, int width)
{
  std::string out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    out += object_char(static_cast<ObjectType>(types[i]));
    if ((i + 1) % static_cast<std::size_t>(width) == 0) out += '\n';
  }
  return out;
}

std::string Breakout::render_ascii() const { return render_type_map(type_map(), config_.width); }

}  // namespace dsn

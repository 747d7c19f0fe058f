#include "dsn/core.hpp"

#include <string>

#include "dsn/errors.hpp"

namespace dsn {

void EnvSpec::validate() const
{
  if (grid_width < 1 || grid_height < 1) throw ConfigError("grid dimensions must be positive");
  if (num_types < 2) throw ConfigError("num_types must be >= 2 (one real type plus void)");
  if (num_types > 64) throw ConfigError("num_types must be <= 64");
  if (num_actions < 1) throw ConfigError("num_actions must be >= 1");
  if (window_side < 1 || window_side % 2 == 0) throw ConfigError("window_side must be odd and >= 1");
}

BitMeaning decode_bit(const EnvSpec& spec, int bit)
{
  if (bit < 0 || bit >= spec.row_length()) throw ContractViolation("bit index out of range: " + std::to_string(bit));
  BitMeaning m{};
  if (bit >= spec.action_offset()) {
    m.kind = BitMeaning::Kind::action;
    m.action = bit - spec.action_offset();
    return m;
  }
  const int block = spec.frame_block();
  m.kind = bit < block ? BitMeaning::Kind::prev_attr : BitMeaning::Kind::curr_attr;
  int local = bit % block;
  int cell = local / spec.num_types;
  m.attribute = local % spec.num_types;
  m.dr = cell / spec.window_side - spec.radius();
  m.dc = cell % spec.window_side - spec.radius();
  return m;
}

int encode_attr_bit(const EnvSpec& spec, bool curr_frame, int dr, int dc, int attribute)
{
  int r = spec.radius();
  int cell = (dr + r) * spec.window_side + (dc + r);
  return (curr_frame ? spec.frame_block() : 0) + cell * spec.num_types + attribute;
}

StateMatrix StateMatrix::from_types(std::span<const std::uint8_t> types, int num_types)
{
  StateMatrix s(static_cast<int>(types.size()), num_types);
  for (std::size_t e = 0; e < types.size(); ++e) {
    if (types[e] >= num_types) throw ConfigError("type id out of range");
    s.set(static_cast<int>(e), types[e]);
  }
  return s;
}

bool StateMatrix::is_one_hot() const
{
  for (int e = 0; e < entities(); ++e) {
    if (popcount(bits_.row(e)) != 1) return false;
  }
  return true;
}

BitMatrix build_augmented(const FrameStack& frames, ActionSelector sel, const EnvSpec& spec)
{
  const int n = spec.entities();
  const int m = spec.num_types;
  for (const StateMatrix* s : {&frames.prev, &frames.curr}) {
    if (s->entities() != n || s->attributes() != m)
      throw ConfigError("frame shape " + std::to_string(s->entities()) + "x" + std::to_string(s->attributes()) +
                        " does not match spec " + std::to_string(n) + "x" + std::to_string(m));
  }
  if (!sel.is_all() && (sel.action() < 0 || sel.action() >= spec.num_actions))
    throw ConfigError("action id out of range");

  BitMatrix x(n, spec.row_length());
  const int rad = spec.radius();
  const int block = spec.frame_block();
  for (int e = 0; e < n; ++e) {
    const int er = e / spec.grid_width;
    const int ec = e % spec.grid_width;
    auto row = x.row(e);
    int cell = 0;
    for (int dr = -rad; dr <= rad; ++dr) {
      for (int dc = -rad; dc <= rad; ++dc, ++cell) {
        int r = er + dr;
        int c = ec + dc;
        if (r < 0 || r >= spec.grid_height || c < 0 || c >= spec.grid_width) continue;
        int nb = r * spec.grid_width + c;
        deposit_bits(row, static_cast<std::size_t>(cell * m), frames.prev.row_word(nb), m);
        deposit_bits(row, static_cast<std::size_t>(block + cell * m), frames.curr.row_word(nb), m);
      }
    }
    if (sel.is_all()) {
      for (int a = 0; a < spec.num_actions; ++a) set_bit(row, spec.action_offset() + a);
    } else {
      set_bit(row, spec.action_offset() + sel.action());
    }
  }
  return x;
}

}  // namespace dsn

#include "dsn/replay.hpp"

#include "dsn/errors.hpp"

namespace dsn {

namespace {

constexpr std::size_t kHeader = 2;  // action, reward

void append_types(std::string& out, const StateMatrix& s)
{
  for (int e = 0; e < s.entities(); ++e) {
    Word w = s.row_word(e);
    if (std::popcount(w) != 1) throw ContractViolation("replay states must be one-hot");
    out.push_back(static_cast<char>(std::countr_zero(w)));
  }
}

}  // namespace

ReplayBuffer::ReplayBuffer(EnvSpec spec) : spec_(spec) { spec_.validate(); }

bool ReplayBuffer::insert(const Transition& t)
{
  const int n = spec_.entities();
  for (const StateMatrix* s : {&t.frames.prev, &t.frames.curr, &t.next}) {
    if (s->entities() != n || s->attributes() != spec_.num_types)
      throw ConfigError("transition shape does not match the buffer spec");
  }
  if (t.action < 0 || t.action >= spec_.num_actions) throw ConfigError("transition action out of range");
  if (t.reward < -128 || t.reward > 127) throw ConfigError("transition reward out of range");

  std::string rec;
  rec.reserve(kHeader + 3 * static_cast<std::size_t>(n));
  rec.push_back(static_cast<char>(t.action));
  rec.push_back(static_cast<char>(static_cast<signed char>(t.reward)));
  append_types(rec, t.frames.prev);
  append_types(rec, t.frames.curr);
  append_types(rec, t.next);

  if (index_.count(rec)) return false;
  records_.push_back(std::move(rec));
  index_.insert(records_.back());
  return true;
}

int ReplayBuffer::action(std::size_t i) const { return static_cast<unsigned char>(records_.at(i)[0]); }

int ReplayBuffer::reward(std::size_t i) const { return static_cast<signed char>(records_.at(i)[1]); }

std::uint8_t ReplayBuffer::type(std::size_t i, int frame, int e) const
{
  return static_cast<std::uint8_t>(records_.at(i)[kHeader + static_cast<std::size_t>(frame * spec_.entities() + e)]);
}

Transition ReplayBuffer::at(std::size_t i) const
{
  const std::string& rec = records_.at(i);
  const auto n = static_cast<std::size_t>(spec_.entities());
  auto frame = [&](int k) {
    std::string_view v(rec.data() + kHeader + k * n, n);
    return StateMatrix::from_types(
        std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(v.data()), v.size()), spec_.num_types);
  };
  return Transition{{frame(0), frame(1)}, action(i), frame(2), reward(i)};
}

}  // namespace dsn

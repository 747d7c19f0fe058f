#include "dsn/schema.hpp"

#include <utility>

#include "dsn/errors.hpp"

namespace dsn {

SchemaVector SchemaVector::from_indices(std::size_t length, std::span<const int> bits)
{
  SchemaVector w(length);
  for (int b : bits) {
    if (b < 0 || static_cast<std::size_t>(b) >= length) throw ContractViolation("schema bit out of range");
    w.set(static_cast<std::size_t>(b));
  }
  return w;
}

std::vector<int> SchemaVector::indices() const
{
  std::vector<int> out;
  for_each_set_bit(words(), [&](std::size_t b) { out.push_back(static_cast<int>(b)); });
  return out;
}

void SchemaMatrix::add(const SchemaVector& w)
{
  if (w.length() != length_) throw ContractViolation("schema length does not match matrix");
  if (w.empty()) throw ContractViolation("empty schema cannot be stored");
  words_.insert(words_.end(), w.words().begin(), w.words().end());
}

void SchemaMatrix::remove_if(const std::function<bool(std::span<const Word>)>& pred)
{
  std::vector<char> marked(size(), 0);
  for (std::size_t i = 0; i < size(); ++i) marked[i] = pred(column(i)) ? 1 : 0;
  remove_marked(marked);
}

std::size_t SchemaMatrix::remove_marked(std::span<const char> marked)
{
  std::vector<Word> kept;
  kept.reserve(words_.size());
  std::size_t removed = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (marked[i]) {
      ++removed;
      continue;
    }
    auto c = column(i);
    kept.insert(kept.end(), c.begin(), c.end());
  }
  words_ = std::move(kept);
  return removed;
}

std::string MatrixTag::str() const
{
  switch (kind) {
    case Kind::creating: return "W+" + std::to_string(attribute);
    case Kind::destroying: return "W-" + std::to_string(attribute);
    case Kind::reward_pos: return "R+";
    case Kind::reward_neg: return "R-";
  }
  return {};
}

MatrixTag MatrixTag::parse(const std::string& s)
{
  if (s == "R+") return {Kind::reward_pos, 0};
  if (s == "R-") return {Kind::reward_neg, 0};
  if (s.size() >= 3 && s[0] == 'W' && (s[1] == '+' || s[1] == '-')) {
    std::size_t used = 0;
    int j = -1;
    try {
      j = std::stoi(s.substr(2), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == s.size() - 2 && j >= 0) return {s[1] == '+' ? Kind::creating : Kind::destroying, j};
  }
  throw ConfigError("unknown matrix tag '" + s + "'");
}

ParameterSet::ParameterSet(int num_types, std::size_t row_length, std::size_t cap_)
    : creating(num_types, SchemaMatrix(row_length)),
      destroying(num_types, SchemaMatrix(row_length)),
      reward_pos(row_length),
      reward_neg(row_length),
      cap(cap_)
{
}

SchemaMatrix& ParameterSet::matrix(const MatrixTag& tag)
{
  return const_cast<SchemaMatrix&>(std::as_const(*this).matrix(tag));
}

const SchemaMatrix& ParameterSet::matrix(const MatrixTag& tag) const
{
  switch (tag.kind) {
    case MatrixTag::Kind::creating:
    case MatrixTag::Kind::destroying: {
      const auto& v = tag.kind == MatrixTag::Kind::creating ? creating : destroying;
      if (tag.attribute < 0 || tag.attribute >= static_cast<int>(v.size()))
        throw ConfigError("matrix tag " + tag.str() + " out of range");
      return v[tag.attribute];
    }
    case MatrixTag::Kind::reward_pos: return reward_pos;
    case MatrixTag::Kind::reward_neg: return reward_neg;
  }
  throw ConfigError("bad matrix tag");
}

std::vector<MatrixTag> ParameterSet::tags() const
{
  std::vector<MatrixTag> out;
  for (int j = 0; j < num_types(); ++j) out.push_back({MatrixTag::Kind::creating, j});
  for (int j = 0; j < num_types(); ++j) out.push_back({MatrixTag::Kind::destroying, j});
  out.push_back({MatrixTag::Kind::reward_pos, 0});
  out.push_back({MatrixTag::Kind::reward_neg, 0});
  return out;
}

std::size_t ParameterSet::total_schemas() const
{
  std::size_t n = 0;
  for (const auto& t : tags()) n += matrix(t).size();
  return n;
}

bool schema_fires(std::span<const Word> row, const SchemaVector& w) { return covers(row, w.words()); }

bool schema_fires(const std::vector<bool>& row, const std::vector<bool>& w)
{
  if (row.size() != w.size()) throw ContractViolation("row and schema lengths differ");
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] && !row[j]) return false;
  }
  return true;
}

std::vector<std::uint8_t> apply_schema_matrix(const BitMatrix& x, const SchemaMatrix& w)
{
  if (!w.empty() && x.cols() != w.length()) throw ContractViolation("augmented width does not match schema length");
  std::vector<std::uint8_t> out(x.rows(), 0);
  for (std::size_t e = 0; e < x.rows(); ++e) {
    auto row = x.row(e);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (covers(row, w.column(i))) {
        out[e] = 1;
        break;
      }
    }
  }
  return out;
}

bool reward_fires(const BitMatrix& x, const SchemaMatrix& r)
{
  if (!r.empty() && x.cols() != r.length()) throw ContractViolation("augmented width does not match schema length");
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t e = 0; e < x.rows(); ++e) {
      if (covers(x.row(e), r.column(i))) return true;
    }
  }
  return false;
}

BitMatrix next_state(const BitMatrix& s, const BitMatrix& delta_plus, const BitMatrix& delta_minus)
{
  if (s.rows() != delta_plus.rows() || s.rows() != delta_minus.rows() || s.cols() != delta_plus.cols() ||
      s.cols() != delta_minus.cols())
    throw ContractViolation("next_state shape mismatch");
  BitMatrix out = s;
  auto o = out.data();
  auto p = delta_plus.data();
  auto m = delta_minus.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (o[i] & ~m[i]) | p[i];
  return out;
}

}  // namespace dsn

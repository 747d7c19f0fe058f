#pragma once

// Schemas (binary conjunctions over augmented rows) and the prediction
// algebra built on them.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dsn/bits.hpp"
#include "dsn/core.hpp"

namespace dsn {

class SchemaVector {
public:
  SchemaVector() = default;
  explicit SchemaVector(std::size_t length) : length_(length), words_(words_for(length), 0) {}
  SchemaVector(std::size_t length, std::span<const Word> words) : length_(length), words_(words.begin(), words.end())
  {
    words_.resize(words_for(length), 0);
  }
  static SchemaVector from_indices(std::size_t length, std::span<const int> bits);

  std::size_t length() const { return length_; }
  bool test(std::size_t b) const { return test_bit(words_, b); }
  void set(std::size_t b, bool v = true) { set_bit(words_, b, v); }
  std::size_t count() const { return popcount(words_); }
  bool empty() const { return count() == 0; }
  std::vector<int> indices() const;

  std::span<const Word> words() const { return words_; }
  std::span<Word> words() { return words_; }

  bool operator==(const SchemaVector&) const = default;

private:
  std::size_t length_ = 0;
  std::vector<Word> words_;
};

/// Column-ordered collection of schemas sharing one row length.
class SchemaMatrix {
public:
  SchemaMatrix() = default;
  explicit SchemaMatrix(std::size_t length) : length_(length), wpr_(words_for(length)) {}

  std::size_t length() const { return length_; }
  std::size_t size() const { return wpr_ ? words_.size() / wpr_ : 0; }
  bool empty() const { return words_.empty(); }
  std::size_t words_per_column() const { return wpr_; }

  std::span<const Word> column(std::size_t i) const { return {words_.data() + i * wpr_, wpr_}; }
  SchemaVector schema(std::size_t i) const { return SchemaVector(length_, column(i)); }

  /// Rejects empty masks and length mismatches with ContractViolation.
  void add(const SchemaVector& w);
  void remove_if(const std::function<bool(std::span<const Word>)>& pred);
  /// Returns how many columns were removed.
  std::size_t remove_marked(std::span<const char> marked);

  bool operator==(const SchemaMatrix&) const = default;

private:
  std::size_t length_ = 0;
  std::size_t wpr_ = 0;
  std::vector<Word> words_;
};

/// Stable identity of a matrix inside a ParameterSet.
struct MatrixTag {
  enum class Kind { creating, destroying, reward_pos, reward_neg } kind;
  int attribute = 0;

  std::string str() const;  // "W+3", "W-0", "R+", "R-"
  static MatrixTag parse(const std::string& s);
  bool operator==(const MatrixTag&) const = default;
};

struct ParameterSet {
  static constexpr std::size_t kDefaultCap = 500;

  std::vector<SchemaMatrix> creating;    // W+_j
  std::vector<SchemaMatrix> destroying;  // W-_j
  SchemaMatrix reward_pos;               // R+
  SchemaMatrix reward_neg;               // R-
  std::size_t cap = kDefaultCap;

  ParameterSet() = default;
  ParameterSet(int num_types, std::size_t row_length, std::size_t cap = kDefaultCap);

  std::size_t row_length() const { return reward_pos.length(); }
  int num_types() const { return static_cast<int>(creating.size()); }

  SchemaMatrix& matrix(const MatrixTag& tag);
  const SchemaMatrix& matrix(const MatrixTag& tag) const;
  /// Canonical order: W+ for every j, then W- for every j, then R+, R-.
  std::vector<MatrixTag> tags() const;
  std::size_t total_schemas() const;

  bool operator==(const ParameterSet&) const = default;
};

bool schema_fires(std::span<const Word> row, const SchemaVector& w);
/// Bit-vector flavour with explicit lengths; throws ContractViolation on mismatch.
bool schema_fires(const std::vector<bool>& row, const std::vector<bool>& w);

/// Entry e is 1 iff some column of W fires on row e of X.
std::vector<std::uint8_t> apply_schema_matrix(const BitMatrix& x, const SchemaMatrix& w);

/// True iff some schema of R fires on some row of X.
bool reward_fires(const BitMatrix& x, const SchemaMatrix& r);

/// (s AND NOT minus) OR plus, the clipped s - delta_minus + delta_plus update.
BitMatrix next_state(const BitMatrix& s, const BitMatrix& delta_plus, const BitMatrix& delta_minus);

}  // namespace dsn

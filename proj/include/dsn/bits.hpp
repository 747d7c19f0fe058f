#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dsn {

using Word = std::uint64_t;
inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

/// True iff every bit set in `mask` is also set in `row`.
inline bool covers(std::span<const Word> row, std::span<const Word> mask)
{
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] & ~row[i]) return false;
  }
  return true;
}

inline std::size_t popcount(std::span<const Word> words)
{
  std::size_t n = 0;
  for (Word w : words) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

inline bool test_bit(std::span<const Word> words, std::size_t bit)
{
  return (words[bit / kWordBits] >> (bit % kWordBits)) & 1U;
}

inline void set_bit(std::span<Word> words, std::size_t bit, bool value = true)
{
  Word m = Word{1} << (bit % kWordBits);
  if (value)
    words[bit / kWordBits] |= m;
  else
    words[bit / kWordBits] &= ~m;
}

/// Writes the low `nbits` of `value` starting at bit `offset` (nbits <= 64).
inline void deposit_bits(std::span<Word> words, std::size_t offset, Word value, std::size_t nbits)
{
  if (nbits == 0) return;
  if (nbits < kWordBits) value &= (Word{1} << nbits) - 1;
  std::size_t w = offset / kWordBits;
  std::size_t s = offset % kWordBits;
  words[w] |= value << s;
  if (s != 0 && s + nbits > kWordBits) words[w + 1] |= value >> (kWordBits - s);
}

/// Reads `nbits` (<= 64) starting at bit `offset`.
inline Word extract_bits(std::span<const Word> words, std::size_t offset, std::size_t nbits)
{
  if (nbits == 0) return 0;
  std::size_t w = offset / kWordBits;
  std::size_t s = offset % kWordBits;
  Word v = words[w] >> s;
  if (s != 0 && s + nbits > kWordBits) v |= words[w + 1] << (kWordBits - s);
  if (nbits < kWordBits) v &= (Word{1} << nbits) - 1;
  return v;
}

/// Calls f(index) for each set bit, ascending.
template <class F>
void for_each_set_bit(std::span<const Word> words, F&& f)
{
  for (std::size_t i = 0; i < words.size(); ++i) {
    Word w = words[i];
    while (w) {
      int b = std::countr_zero(w);
      f(i * kWordBits + static_cast<std::size_t>(b));
      w &= w - 1;
    }
  }
}

/// Dense row-major bit matrix; each row padded to whole words.
class BitMatrix {
public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), wpr_(words_for(cols)), words_(rows * words_for(cols), 0)
  {
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words_per_row() const { return wpr_; }

  std::span<const Word> row(std::size_t r) const { return {words_.data() + r * wpr_, wpr_}; }
  std::span<Word> row(std::size_t r) { return {words_.data() + r * wpr_, wpr_}; }

  bool get(std::size_t r, std::size_t c) const { return test_bit(row(r), c); }
  void set(std::size_t r, std::size_t c, bool v = true) { set_bit(row(r), c, v); }

  /// Appends a row (must have words_per_row() words) and returns its index.
  std::size_t push_row(std::span<const Word> bits)
  {
    words_.insert(words_.end(), bits.begin(), bits.end());
    return rows_++;
  }

  void reserve_rows(std::size_t n) { words_.reserve(n * wpr_); }

  std::span<const Word> data() const { return words_; }
  std::span<Word> data() { return words_; }

  bool operator==(const BitMatrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t wpr_ = 0;
  std::vector<Word> words_;
};

}  // namespace dsn

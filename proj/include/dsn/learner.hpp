#pragma once

// Self-supervised schema learning over the replay buffer.
//
// Each schema is grown from one uncovered positive ("seed") row: starting at
// the seed's full mask, it is intersected with further uncovered positives
// while that creates no false positive, then simplified by clearing bits from
// the highest index down whenever no label-0 row starts firing. The result is
// inclusion-minimal, fires on the seed and rejects every negative.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsn/core.hpp"
#include "dsn/replay.hpp"
#include "dsn/schema.hpp"

namespace dsn {

/// Bit-sliced row store: alongside the rows it keeps, for every column, the
/// set of rows that have that bit. "Which rows does this mask fire on" is
/// then an AND over the mask's columns.
class RowIndex {
public:
  explicit RowIndex(std::size_t cols = 0);

  std::size_t add(std::span<const Word> row);
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t words_per_row() const { return wpr_; }
  /// Words in a row-set bitset.
  std::size_t set_words() const { return words_for(rows_); }

  std::span<const Word> row(std::size_t i) const { return {data_.data() + i * wpr_, wpr_}; }
  /// Per column, the rows having that bit; may be shorter than set_words().
  const std::vector<std::vector<Word>>& columns() const { return columns_; }

  /// Rows of `candidates` on which `mask` fires.
  std::vector<Word> fires(std::span<const Word> mask, std::span<const Word> candidates) const;
  bool fires_any(std::span<const Word> mask, std::span<const Word> candidates) const;

private:
  std::vector<std::size_t> column_order(std::span<const Word> mask) const;

  std::size_t cols_ = 0;
  std::size_t wpr_ = 0;
  std::size_t rows_ = 0;
  std::vector<Word> data_;
  std::vector<std::vector<Word>> columns_;
  std::vector<std::size_t> column_count_;
};

struct LearnOptions {
  int generalize_trials = 32;
  bool random_seed = false;  // pick the seed uniformly instead of lowest index
  std::uint64_t seed = 0;
  // Simplification clears bits of higher rank first (ties: higher index
  // first), so low-rank bits are the ones that survive. Empty ranks by index.
  std::vector<int> removal_rank;
  bool locality = true;  // Learner fills removal_rank from locality_rank()
};

/// Far window cells rank above near ones, the previous frame above the
/// current one at equal distance, actions lowest: schemas keep local causes.
std::vector<int> locality_rank(const EnvSpec& spec);

/// Rows built with single(action). Label 1 = the attribute changes.
struct AttributeDataset {
  BitMatrix rows;
  std::vector<std::uint8_t> labels;
  std::vector<std::pair<int, int>> provenance;  // (transition id, entity id)
};

/// Multi-instance reward data: a bag is satisfied when any of its rows fires.
struct RewardDataset {
  BitMatrix rows;
  std::vector<std::vector<std::uint32_t>> bags;  // indices into rows
  std::vector<std::uint8_t> negative;            // per row
  // Per row, optional: the entity's own cell changes. Seeds are drawn from
  // changing members when a bag has any, since rewards come with events.
  std::vector<std::uint8_t> changing;
};

/// None if the lowest uncovered positive is contradicted by a negative, or if
/// nothing is left uncovered.
std::optional<SchemaVector> learn_schema(const AttributeDataset& data, const SchemaMatrix& existing,
                                         const LearnOptions& opts = {});
std::optional<SchemaVector> learn_reward_schema(const RewardDataset& data, const SchemaMatrix& existing,
                                                const LearnOptions& opts = {});

struct TargetReport {
  MatrixTag tag;
  std::size_t added = 0;
  std::size_t removed = 0;
  std::size_t residual_false_negatives = 0;
  std::size_t contradictions = 0;
  bool saturated = false;  // hit the column cap with positives left
};

struct EpochReport {
  std::vector<TargetReport> targets;

  std::size_t added() const;
  std::size_t removed() const;
  std::size_t residual_false_negatives() const;
  bool saturated() const;
  std::string summary() const;
};

/// Incremental learner state: the unique augmented rows of a buffer with
/// their observed outcomes, kept in sync by replaying new transitions.
class Learner {
public:
  explicit Learner(EnvSpec spec, LearnOptions opts = {});

  /// Ingests transitions appended to `buffer` since the last call.
  void sync(const ReplayBuffer& buffer);

  std::size_t prune_false_positives(ParameterSet& params) const;
  EpochReport learn_epoch(const ReplayBuffer& buffer, ParameterSet& params);

  std::size_t unique_rows() const { return index_.rows(); }
  const RowIndex& index() const { return index_; }

  /// Positive and negative row sets of one target, as bitsets over unique rows.
  std::vector<Word> positives(const MatrixTag& tag) const;
  std::vector<Word> negatives(const MatrixTag& tag) const;
  std::size_t false_positives(const MatrixTag& tag, const SchemaVector& w) const;
  std::size_t residual_false_negatives(const MatrixTag& tag, const SchemaMatrix& m) const;

  AttributeDataset attribute_dataset(int attribute, bool creating) const;
  RewardDataset reward_dataset(bool positive) const;

private:
  struct RowInfo {
    Word next_or = 0;
    Word next_and = ~Word{0};
    Word centre = 0;
    bool seen_nonpositive = false;  // in a transition whose reward is <= 0
    bool seen_nonnegative = false;  // in a transition whose reward is >= 0
    std::pair<int, int> origin;
  };

  TargetReport learn_attribute(const MatrixTag& tag, SchemaMatrix& m, std::size_t cap);
  TargetReport learn_reward(const MatrixTag& tag, SchemaMatrix& m, std::size_t cap);
  std::vector<std::uint8_t> changing_rows() const;
  const std::vector<std::vector<std::uint32_t>>& bags(bool positive) const
  {
    return positive ? pos_bags_ : neg_bags_;
  }

  EnvSpec spec_;
  LearnOptions opts_;
  RowIndex index_;
  std::vector<RowInfo> info_;
  std::unordered_map<std::string, std::uint32_t> lookup_;
  std::vector<std::vector<std::uint32_t>> pos_bags_;
  std::vector<std::vector<std::uint32_t>> neg_bags_;
  std::size_t synced_ = 0;
  const ReplayBuffer* source_ = nullptr;
};

std::size_t prune_false_positives(const ReplayBuffer& buffer, ParameterSet& params);
EpochReport learn_epoch(const ReplayBuffer& buffer, ParameterSet& params, const LearnOptions& opts = {});

/// Process-wide count of schema-learning calls, for instrumentation.
std::uint64_t learner_invocations();

}  // namespace dsn

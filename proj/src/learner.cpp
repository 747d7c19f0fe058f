#include "dsn/learner.hpp"

#include <algorithm>
#include <atomic>
#include <random>
#include <sstream>
#include <utility>

#include "dsn/errors.hpp"

namespace dsn {

namespace {

std::atomic<std::uint64_t> g_invocations{0};

using Bitset = std::vector<Word>;
using Sparse = std::vector<std::pair<std::uint32_t, Word>>;

bool any(std::span<const Word> b)
{
  for (Word w : b)
    if (w) return true;
  return false;
}

void and_not(Bitset& a, std::span<const Word> b)
{
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) a[i] &= ~b[i];
}

void or_into(Bitset& a, std::span<const Word> b)
{
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) a[i] |= b[i];
}

std::vector<std::size_t> members(std::span<const Word> b)
{
  std::vector<std::size_t> out;
  for_each_set_bit(b, [&](std::size_t i) { out.push_back(i); });
  return out;
}

std::size_t pick_seed(std::span<const Word> pool, const LearnOptions& opts, std::mt19937_64& rng)
{
  if (!opts.random_seed) {
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (pool[i]) return i * kWordBits + static_cast<std::size_t>(std::countr_zero(pool[i]));
  }
  auto all = members(pool);
  return all[rng() % all.size()];
}

// Column access that tolerates columns shorter than the row-set bitset.
Word column_word(const std::vector<Word>& col, std::size_t x) { return x < col.size() ? col[x] : 0; }

class Search {
public:
  Search(const RowIndex& idx, std::span<const Word> neg, const std::vector<int>& rank)
      : idx_(idx), neg_(neg), cols_(idx.columns()), rank_(rank)
  {
  }

  bool contradicted(std::span<const Word> mask) const { return idx_.fires_any(mask, neg_); }

  // Intersects w with the most similar other positives while that keeps it
  // free of false positives.
  SchemaVector generalize(SchemaVector w, std::span<const Word> pool, std::size_t seed, int trials) const
  {
    if (trials <= 0) return w;
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (-overlap, id) ordering below
    const std::size_t wpr = idx_.words_per_row();
    for_each_set_bit(pool, [&](std::size_t p) {
      if (p == seed) return;
      auto r = idx_.row(p);
      std::size_t ov = 0;
      for (std::size_t i = 0; i < wpr; ++i) ov += static_cast<std::size_t>(std::popcount(r[i] & w.words()[i]));
      ranked.emplace_back(ov, p);
    });
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    std::size_t k = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(trials));
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(), better);
    for (std::size_t t = 0; t < k; ++t) {
      SchemaVector m = w;
      auto r = idx_.row(ranked[t].second);
      for (std::size_t i = 0; i < wpr; ++i) m.words()[i] &= r[i];
      if (m == w || m.empty()) continue;
      if (!contradicted(m.words())) w = std::move(m);
    }
    return w;
  }

  // Clears bits in removal order while no negative starts firing.
  SchemaVector simplify(const SchemaVector& w) const
  {
    std::vector<int> bits = w.indices();
    if (!rank_.empty()) {
      auto key = [&](int b) { return static_cast<std::size_t>(b) < rank_.size() ? rank_[static_cast<std::size_t>(b)] : 0; };
      std::stable_sort(bits.begin(), bits.end(), [&](int a, int b) { return key(a) < key(b); });
    }
    const std::size_t k = bits.size();
    if (k == 0) return w;
    // levels[i] = negatives that have every one of bits[0..i-1]
    std::vector<Sparse> levels(k);
    for (std::size_t x = 0; x < neg_.size(); ++x)
      if (neg_[x]) levels[0].emplace_back(static_cast<std::uint32_t>(x), neg_[x]);
    for (std::size_t i = 1; i < k; ++i) {
      const auto& col = cols_[static_cast<std::size_t>(bits[i - 1])];
      for (auto [x, v] : levels[i - 1]) {
        Word nv = v & column_word(col, x);
        if (nv) levels[i].emplace_back(x, nv);
      }
    }
    std::vector<int> kept;
    for (std::size_t i = k; i-- > 0;) {
      bool fp = false;
      for (auto [x, v] : levels[i]) {
        for (int b : kept) {
          v &= column_word(cols_[static_cast<std::size_t>(b)], x);
          if (!v) break;
        }
        if (v) {
          fp = true;
          break;
        }
      }
      if (fp || (i == 0 && kept.empty())) kept.push_back(bits[i]);
    }
    std::sort(kept.begin(), kept.end());
    return SchemaVector::from_indices(w.length(), kept);
  }

private:
  const RowIndex& idx_;
  std::span<const Word> neg_;
  const std::vector<std::vector<Word>>& cols_;
  const std::vector<int>& rank_;
};

struct Candidate {
  SchemaVector w;
  std::size_t coverage = 0;
};

// One attribute schema grown from `seed`; none when the seed is contradicted.
std::optional<SchemaVector> grow_attribute(const RowIndex& idx, std::span<const Word> neg, std::span<const Word> pool, std::size_t seed,
                                           const LearnOptions& opts)
{
  Search s(idx, neg, opts.removal_rank);
  SchemaVector full(idx.cols(), idx.row(seed));
  if (s.contradicted(full.words())) return std::nullopt;
  std::vector<SchemaVector> tries{s.simplify(s.generalize(full, pool, seed, opts.generalize_trials))};
  if (opts.generalize_trials > 0) {
    SchemaVector plain = s.simplify(full);
    if (!(plain == tries[0])) tries.push_back(std::move(plain));
  }
  std::optional<Candidate> best;
  for (auto& w : tries) {
    std::size_t cov = popcount(idx.fires(w.words(), pool));
    if (!best || cov > best->coverage) best = Candidate{w, cov};
  }
  return best->w;
}

struct BagState {
  const std::vector<std::vector<std::uint32_t>>* bags;
  Bitset member_rows;  // union of all bag members
  Bitset fired;        // member rows fired by accepted schemas
  std::vector<char> excluded;
  const std::vector<std::uint8_t>* changing = nullptr;  // per row; null = all seedable

  bool covered(std::size_t b, std::span<const Word> fired_rows) const
  {
    for (auto r : (*bags)[b])
      if (test_bit(fired_rows, r)) return true;
    return false;
  }
};

std::size_t bag_coverage(const BagState& st, std::span<const Word> w_fired)
{
  std::size_t n = 0;
  for (std::size_t b = 0; b < st.bags->size(); ++b)
    if (!st.covered(b, st.fired) && st.covered(b, w_fired)) ++n;
  return n;
}

std::optional<SchemaVector> grow_reward(const RowIndex& idx, std::span<const Word> neg, const BagState& st, std::size_t target,
                                        const LearnOptions& opts)
{
  Search s(idx, neg, opts.removal_rank);
  const auto& bags = *st.bags;
  std::vector<std::size_t> others;
  for (std::size_t b = 0; b < bags.size(); ++b)
    if (b != target && !st.covered(b, st.fired)) others.push_back(b);

  const std::size_t wpr = idx.words_per_row();
  // With a removal rank, shared low-rank bits weigh more, so the partner
  // picked from another bag is the member aligned on the same nearby objects.
  const auto& rank = opts.removal_rank;
  const int top = rank.empty() ? 0 : *std::max_element(rank.begin(), rank.end()) + 1;
  auto overlap = [&](const SchemaVector& w, std::size_t r) {
    auto row = idx.row(r);
    std::size_t ov = 0;
    for (std::size_t i = 0; i < wpr; ++i) {
      Word both = row[i] & w.words()[i];
      if (rank.empty()) {
        ov += static_cast<std::size_t>(std::popcount(both));
        continue;
      }
      while (both) {
        std::size_t b = i * kWordBits + static_cast<std::size_t>(std::countr_zero(both));
        ov += static_cast<std::size_t>(top - (b < rank.size() ? rank[b] : 0));
        both &= both - 1;
      }
    }
    return ov;
  };

  std::vector<std::uint32_t> seeds;
  if (st.changing)
    for (auto r : bags[target])
      if (r < st.changing->size() && (*st.changing)[r]) seeds.push_back(r);
  if (seeds.empty()) seeds = bags[target];

  std::optional<Candidate> best;
  std::vector<SchemaVector> tried;
  for (auto r : seeds) {
    SchemaVector w(idx.cols(), idx.row(r));
    if (s.contradicted(w.words())) continue;
    // generalize against the closest member of the most similar other bags
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (overlap, row)
    for (auto b : others) {
      std::size_t bo = 0, br = bags[b].front();
      for (auto m : bags[b]) {
        std::size_t ov = overlap(w, m);
        if (ov > bo) bo = ov, br = m;
      }
      ranked.emplace_back(bo, br);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    int trials = opts.generalize_trials;
    for (auto [ov, m] : ranked) {
      if (trials-- <= 0) break;
      SchemaVector g = w;
      auto row = idx.row(m);
      for (std::size_t i = 0; i < wpr; ++i) g.words()[i] &= row[i];
      if (g == w || g.empty()) continue;
      if (!s.contradicted(g.words())) w = std::move(g);
    }
    w = s.simplify(w);
    if (std::find(tried.begin(), tried.end(), w) != tried.end()) continue;
    tried.push_back(w);
    std::size_t cov = bag_coverage(st, idx.fires(w.words(), st.member_rows));
    if (!best || cov > best->coverage) best = Candidate{w, cov};
  }
  if (!best) return std::nullopt;
  return best->w;
}

RowIndex index_rows(const BitMatrix& rows)
{
  RowIndex idx(rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) idx.add(rows.row(r));
  return idx;
}

}  // namespace

RowIndex::RowIndex(std::size_t cols)
    : cols_(cols), wpr_(words_for(cols)), columns_(cols), column_count_(cols, 0)
{
}

std::size_t RowIndex::add(std::span<const Word> row)
{
  const std::size_t id = rows_++;
  data_.insert(data_.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(wpr_));
  const std::size_t need = words_for(rows_);
  for_each_set_bit(row.first(wpr_), [&](std::size_t b) {
    if (b >= cols_) return;
    auto& col = columns_[b];
    if (col.size() < need) col.resize(std::max(need, col.size() * 2), 0);
    set_bit(col, id);
    ++column_count_[b];
  });
  return id;
}

std::vector<std::size_t> RowIndex::column_order(std::span<const Word> mask) const
{
  std::vector<std::size_t> bits;
  for_each_set_bit(mask, [&](std::size_t b) { bits.push_back(b); });
  std::sort(bits.begin(), bits.end(), [&](std::size_t a, std::size_t b) {
    return column_count_[a] != column_count_[b] ? column_count_[a] < column_count_[b] : a < b;
  });
  return bits;
}

std::vector<Word> RowIndex::fires(std::span<const Word> mask, std::span<const Word> candidates) const
{
  auto bits = column_order(mask);
  std::vector<Word> out(candidates.size(), 0);
  for (std::size_t x = 0; x < candidates.size(); ++x) {
    Word v = candidates[x];
    for (std::size_t b : bits) {
      if (!v) break;
      v &= column_word(columns_[b], x);
    }
    out[x] = v;
  }
  return out;
}

bool RowIndex::fires_any(std::span<const Word> mask, std::span<const Word> candidates) const
{
  auto bits = column_order(mask);
  for (std::size_t x = 0; x < candidates.size(); ++x) {
    Word v = candidates[x];
    for (std::size_t b : bits) {
      if (!v) break;
      v &= column_word(columns_[b], x);
    }
    if (v) return true;
  }
  return false;
}

std::optional<SchemaVector> learn_schema(const AttributeDataset& data, const SchemaMatrix& existing,
                                         const LearnOptions& opts)
{
  ++g_invocations;
  if (data.labels.size() != data.rows.rows()) throw ContractViolation("one label per row required");
  if (!existing.empty() && existing.length() != data.rows.cols())
    throw ContractViolation("schema length does not match dataset rows");
  RowIndex idx = index_rows(data.rows);
  Bitset pos(idx.set_words(), 0), neg(idx.set_words(), 0);
  for (std::size_t r = 0; r < data.labels.size(); ++r) set_bit(data.labels[r] ? pos : neg, r);
  for (std::size_t i = 0; i < existing.size(); ++i) and_not(pos, idx.fires(existing.column(i), pos));
  if (!any(pos)) return std::nullopt;
  std::mt19937_64 rng(opts.seed);
  std::size_t seed = pick_seed(pos, opts, rng);
  return grow_attribute(idx, neg, pos, seed, opts);
}

std::optional<SchemaVector> learn_reward_schema(const RewardDataset& data, const SchemaMatrix& existing,
                                                const LearnOptions& opts)
{
  ++g_invocations;
  if (data.negative.size() != data.rows.rows()) throw ContractViolation("one negative flag per row required");
  RowIndex idx = index_rows(data.rows);
  Bitset neg(idx.set_words(), 0);
  for (std::size_t r = 0; r < data.negative.size(); ++r)
    if (data.negative[r]) set_bit(neg, r);
  BagState st{&data.bags, Bitset(idx.set_words(), 0), Bitset(idx.set_words(), 0), {}};
  for (const auto& bag : data.bags)
    for (auto r : bag) {
      if (r >= data.rows.rows()) throw ContractViolation("bag member out of range");
      set_bit(st.member_rows, r);
    }
  if (!data.changing.empty()) {
    if (data.changing.size() != data.rows.rows()) throw ContractViolation("one changing flag per row required");
    st.changing = &data.changing;
  }
  for (std::size_t i = 0; i < existing.size(); ++i) or_into(st.fired, idx.fires(existing.column(i), st.member_rows));
  std::vector<std::size_t> open;
  for (std::size_t b = 0; b < data.bags.size(); ++b)
    if (!data.bags[b].empty() && !st.covered(b, st.fired)) open.push_back(b);
  if (open.empty()) return std::nullopt;
  std::mt19937_64 rng(opts.seed);
  std::size_t target = opts.random_seed ? open[rng() % open.size()] : open.front();
  return grow_reward(idx, neg, st, target, opts);
}

std::size_t EpochReport::added() const
{
  std::size_t n = 0;
  for (const auto& t : targets) n += t.added;
  return n;
}

std::size_t EpochReport::removed() const
{
  std::size_t n = 0;
  for (const auto& t : targets) n += t.removed;
  return n;
}

std::size_t EpochReport::residual_false_negatives() const
{
  std::size_t n = 0;
  for (const auto& t : targets) n += t.residual_false_negatives;
  return n;
}

bool EpochReport::saturated() const
{
  return std::any_of(targets.begin(), targets.end(), [](const TargetReport& t) { return t.saturated; });
}

std::string EpochReport::summary() const
{
  std::ostringstream os;
  os << "added " << added() << " removed " << removed() << " residual " << residual_false_negatives();
  for (const auto& t : targets) {
    if (t.residual_false_negatives || t.saturated || t.contradictions) {
      os << " | " << t.tag.str() << " residual=" << t.residual_false_negatives;
      if (t.contradictions) os << " contradictions=" << t.contradictions;
      if (t.saturated) os << " SATURATED";
    }
  }
  return os.str();
}

std::vector<int> locality_rank(const EnvSpec& spec)
{
  spec.validate();
  std::vector<int> rank(static_cast<std::size_t>(spec.row_length()), 0);
  for (int b = 0; b < spec.action_offset(); ++b) {
    BitMeaning m = decode_bit(spec, b);
    rank[static_cast<std::size_t>(b)] = 2 * (m.dr * m.dr + m.dc * m.dc) + (m.kind == BitMeaning::Kind::prev_attr ? 2 : 1);
  }
  return rank;
}

Learner::Learner(EnvSpec spec, LearnOptions opts) : spec_(spec), opts_(std::move(opts)), index_(spec.row_length())
{
  spec_.validate();
  if (opts_.locality && opts_.removal_rank.empty()) opts_.removal_rank = locality_rank(spec_);
}

void Learner::sync(const ReplayBuffer& buffer)
{
  if (!(buffer.spec() == spec_)) throw ConfigError("buffer spec does not match learner spec");
  if (source_ && source_ != &buffer) throw ContractViolation("learner is bound to a different buffer");
  if (buffer.size() < synced_) throw ContractViolation("buffer shrank since last sync");
  source_ = &buffer;
  const int centre = encode_attr_bit(spec_, true, 0, 0, 0);
  const int n = spec_.entities();
  for (; synced_ < buffer.size(); ++synced_) {
    const Transition t = buffer.at(synced_);
    const BitMatrix x = build_augmented(t.frames, ActionSelector::single(t.action), spec_);
    std::vector<std::uint32_t> bag;
    for (int e = 0; e < n; ++e) {
      auto row = x.row(e);
      std::string key(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(Word));
      auto [it, fresh] = lookup_.emplace(std::move(key), static_cast<std::uint32_t>(index_.rows()));
      if (fresh) {
        index_.add(row);
        RowInfo info;
        info.centre = extract_bits(row, static_cast<std::size_t>(centre), static_cast<std::size_t>(spec_.num_types));
        info.origin = {static_cast<int>(synced_), e};
        info_.push_back(info);
      }
      RowInfo& info = info_[it->second];
      Word next = t.next.row_word(e);
      info.next_or |= next;
      info.next_and &= next;
      if (t.reward <= 0) info.seen_nonpositive = true;
      if (t.reward >= 0) info.seen_nonnegative = true;
      bag.push_back(it->second);
    }
    if (t.reward != 0) {
      std::sort(bag.begin(), bag.end());
      bag.erase(std::unique(bag.begin(), bag.end()), bag.end());
      (t.reward > 0 ? pos_bags_ : neg_bags_).push_back(std::move(bag));
    }
  }
}

std::vector<Word> Learner::positives(const MatrixTag& tag) const
{
  Bitset out(index_.set_words(), 0);
  const Word bit = Word{1} << tag.attribute;
  for (std::size_t r = 0; r < info_.size(); ++r) {
    const RowInfo& in = info_[r];
    bool p = false;
    switch (tag.kind) {
      case MatrixTag::Kind::creating: p = !(in.centre & bit) && (in.next_or & bit); break;
      case MatrixTag::Kind::destroying: p = (in.centre & bit) && !(in.next_and & bit); break;
      case MatrixTag::Kind::reward_pos:
      case MatrixTag::Kind::reward_neg: {
        // rows belonging to some bag of the matching sign
        break;
      }
    }
    if (p) set_bit(out, r);
  }
  if (tag.kind == MatrixTag::Kind::reward_pos || tag.kind == MatrixTag::Kind::reward_neg) {
    for (const auto& bag : bags(tag.kind == MatrixTag::Kind::reward_pos))
      for (auto r : bag) set_bit(out, r);
  }
  return out;
}

std::vector<Word> Learner::negatives(const MatrixTag& tag) const
{
  Bitset out(index_.set_words(), 0);
  const Word bit = Word{1} << tag.attribute;
  for (std::size_t r = 0; r < info_.size(); ++r) {
    const RowInfo& in = info_[r];
    bool n = false;
    switch (tag.kind) {
      case MatrixTag::Kind::creating: n = !(in.centre & bit) && !(in.next_and & bit); break;
      case MatrixTag::Kind::destroying: n = (in.centre & bit) && (in.next_or & bit); break;
      case MatrixTag::Kind::reward_pos: n = in.seen_nonpositive; break;
      case MatrixTag::Kind::reward_neg: n = in.seen_nonnegative; break;
    }
    if (n) set_bit(out, r);
  }
  return out;
}

std::size_t Learner::false_positives(const MatrixTag& tag, const SchemaVector& w) const
{
  return popcount(index_.fires(w.words(), negatives(tag)));
}

std::size_t Learner::residual_false_negatives(const MatrixTag& tag, const SchemaMatrix& m) const
{
  Bitset fired(index_.set_words(), 0);
  const bool reward = tag.kind == MatrixTag::Kind::reward_pos || tag.kind == MatrixTag::Kind::reward_neg;
  Bitset pos = positives(tag);
  for (std::size_t i = 0; i < m.size(); ++i) or_into(fired, index_.fires(m.column(i), pos));
  if (!reward) {
    and_not(pos, fired);
    return popcount(pos);
  }
  std::size_t n = 0;
  for (const auto& bag : bags(tag.kind == MatrixTag::Kind::reward_pos)) {
    bool hit = false;
    for (auto r : bag) hit = hit || test_bit(fired, r);
    n += hit ? 0 : 1;
  }
  return n;
}

std::size_t Learner::prune_false_positives(ParameterSet& params) const
{
  std::size_t removed = 0;
  for (const auto& tag : params.tags()) {
    SchemaMatrix& m = params.matrix(tag);
    if (m.empty()) continue;
    Bitset neg = negatives(tag);
    removed += m.remove_marked([&] {
      std::vector<char> marked(m.size(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) marked[i] = index_.fires_any(m.column(i), neg) ? 1 : 0;
      return marked;
    }());
  }
  return removed;
}

TargetReport Learner::learn_attribute(const MatrixTag& tag, SchemaMatrix& m, std::size_t cap)
{
  TargetReport rep{tag};
  Bitset neg = negatives(tag);
  Bitset pool = positives(tag);
  for (std::size_t i = 0; i < m.size(); ++i) and_not(pool, index_.fires(m.column(i), pool));
  Bitset open = pool;
  std::mt19937_64 rng(opts_.seed ^ (static_cast<std::uint64_t>(tag.attribute) << 8 | static_cast<std::uint64_t>(tag.kind)));
  while (any(open) && m.size() < cap) {
    std::size_t seed = pick_seed(open, opts_, rng);
    ++g_invocations;
    auto w = grow_attribute(index_, neg, pool, seed, opts_);
    if (!w) {
      set_bit(open, seed, false);
      ++rep.contradictions;
      continue;
    }
    m.add(*w);
    ++rep.added;
    auto hit = index_.fires(w->words(), pool);
    and_not(pool, hit);
    and_not(open, hit);
  }
  rep.residual_false_negatives = popcount(pool);
  rep.saturated = any(open);
  return rep;
}

TargetReport Learner::learn_reward(const MatrixTag& tag, SchemaMatrix& m, std::size_t cap)
{
  TargetReport rep{tag};
  const auto& bag_list = bags(tag.kind == MatrixTag::Kind::reward_pos);
  Bitset neg = negatives(tag);
  BagState st{&bag_list, Bitset(index_.set_words(), 0), Bitset(index_.set_words(), 0), {}};
  for (const auto& bag : bag_list)
    for (auto r : bag) set_bit(st.member_rows, r);
  for (std::size_t i = 0; i < m.size(); ++i) or_into(st.fired, index_.fires(m.column(i), st.member_rows));
  st.excluded.assign(bag_list.size(), 0);
  std::vector<std::uint8_t> changing = changing_rows();
  st.changing = &changing;
  std::mt19937_64 rng(opts_.seed ^ static_cast<std::uint64_t>(tag.kind));
  while (m.size() < cap) {
    std::vector<std::size_t> open;
    for (std::size_t b = 0; b < bag_list.size(); ++b)
      if (!st.excluded[b] && !st.covered(b, st.fired)) open.push_back(b);
    if (open.empty()) break;
    std::size_t target = opts_.random_seed ? open[rng() % open.size()] : open.front();
    ++g_invocations;
    auto w = grow_reward(index_, neg, st, target, opts_);
    if (!w) {
      st.excluded[target] = 1;
      ++rep.contradictions;
      continue;
    }
    m.add(*w);
    ++rep.added;
    or_into(st.fired, index_.fires(w->words(), st.member_rows));
  }
  for (std::size_t b = 0; b < bag_list.size(); ++b) {
    if (st.covered(b, st.fired)) continue;
    ++rep.residual_false_negatives;
    if (!st.excluded[b]) rep.saturated = true;
  }
  return rep;
}

EpochReport Learner::learn_epoch(const ReplayBuffer& buffer, ParameterSet& params)
{
  if (params.row_length() != static_cast<std::size_t>(spec_.row_length()))
    throw ConfigError("parameter row length does not match the environment layout");
  sync(buffer);
  EpochReport report;
  for (const auto& tag : params.tags()) {
    SchemaMatrix& m = params.matrix(tag);
    TargetReport rep;
    std::size_t removed = 0;
    if (!m.empty()) {
      Bitset neg = negatives(tag);
      std::vector<char> marked(m.size(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) marked[i] = index_.fires_any(m.column(i), neg) ? 1 : 0;
      removed = m.remove_marked(marked);
    }
    const bool reward = tag.kind == MatrixTag::Kind::reward_pos || tag.kind == MatrixTag::Kind::reward_neg;
    rep = reward ? learn_reward(tag, m, params.cap) : learn_attribute(tag, m, params.cap);
    rep.removed = removed;
    report.targets.push_back(rep);
  }
  return report;
}

AttributeDataset Learner::attribute_dataset(int attribute, bool creating) const
{
  MatrixTag tag{creating ? MatrixTag::Kind::creating : MatrixTag::Kind::destroying, attribute};
  Bitset pos = positives(tag), neg = negatives(tag);
  AttributeDataset d{BitMatrix(0, index_.cols()), {}, {}};
  for (std::size_t r = 0; r < index_.rows(); ++r) {
    bool p = test_bit(pos, r), n = test_bit(neg, r);
    // a contradictory row appears once with each label
    for (int label = 1; label >= 0; --label) {
      if (label ? !p : !n) continue;
      d.rows.push_row(index_.row(r));
      d.labels.push_back(static_cast<std::uint8_t>(label));
      d.provenance.push_back(info_[r].origin);
    }
  }
  return d;
}

RewardDataset Learner::reward_dataset(bool positive) const
{
  RewardDataset d{BitMatrix(0, index_.cols()), bags(positive), {}, {}};
  Bitset neg = negatives(MatrixTag{positive ? MatrixTag::Kind::reward_pos : MatrixTag::Kind::reward_neg, 0});
  for (std::size_t r = 0; r < index_.rows(); ++r) {
    d.rows.push_row(index_.row(r));
    d.negative.push_back(test_bit(neg, r) ? 1 : 0);
  }
  d.changing = changing_rows();
  return d;
}

std::vector<std::uint8_t> Learner::changing_rows() const
{
  std::vector<std::uint8_t> out(info_.size(), 0);
  for (std::size_t r = 0; r < info_.size(); ++r)
    out[r] = info_[r].next_or != info_[r].centre || info_[r].next_and != info_[r].centre;
  return out;
}

std::size_t prune_false_positives(const ReplayBuffer& buffer, ParameterSet& params)
{
  Learner l(buffer.spec());
  l.sync(buffer);
  return l.prune_false_positives(params);
}

EpochReport learn_epoch(const ReplayBuffer& buffer, ParameterSet& params, const LearnOptions& opts)
{
  Learner l(buffer.spec(), opts);
  return l.learn_epoch(buffer, params);
}

std::uint64_t learner_invocations() { return g_invocations.load(); }

}  // namespace dsn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "mdp.hpp"
#include "region.hpp"

namespace mealrl {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  FeasibilityMask next_mask;
  bool terminal = false;
};

/// Entries kept in descending priority order; equal priorities keep the
/// older entry first. Stored as a list of bounded sorted blocks so insert,
/// erase and select-by-rank stay cheap at replay-memory sizes.
class RankIndex {
 public:
  struct Entry {
    double key = 0.0;
    std::uint64_t seq = 0;
    int slot = 0;
  };

  void insert(const Entry& e) {
    ++size_;
    if (blocks_.empty()) {
      blocks_.push_back({e});
      return;
    }
    auto block = std::lower_bound(blocks_.begin(), blocks_.end(), e,
                                  [](const std::vector<Entry>& b, const Entry& x) { return before(b.back(), x); });
    if (block == blocks_.end()) --block;
    auto pos = std::lower_bound(block->begin(), block->end(), e, before);
    block->insert(pos, e);
    if (block->size() > 2 * kBlock) {
      std::vector<Entry> tail(block->begin() + kBlock, block->end());
      block->resize(kBlock);
      blocks_.insert(block + 1, std::move(tail));
    }
  }

  void erase(const Entry& e) {
    auto [bi, pos] = locate(e);
    auto& block = blocks_[bi];
    block.erase(block.begin() + static_cast<std::ptrdiff_t>(pos));
    if (block.empty()) blocks_.erase(blocks_.begin() + static_cast<std::ptrdiff_t>(bi));
    --size_;
  }

  /// Entry at 0-based rank (0 = highest priority).
  const Entry& select(std::size_t rank) const {
    for (const auto& b : blocks_) {
      if (rank < b.size()) return b[rank];
      rank -= b.size();
    }
    throw std::out_of_range("RankIndex::select: rank out of range");
  }

  /// 0-based rank of an entry that is present.
  std::size_t rank_of(const Entry& e) const {
    auto [bi, pos] = locate(e);
    std::size_t rank = pos;
    for (std::size_t i = 0; i < bi; ++i) rank += blocks_[i].size();
    return rank;
  }

  std::size_t size() const noexcept { return size_; }

 private:
  static constexpr std::size_t kBlock = 128;

  static bool before(const Entry& a, const Entry& b) {
    if (a.key != b.key) return a.key > b.key;
    return a.seq < b.seq;
  }

  std::pair<std::size_t, std::size_t> locate(const Entry& e) const {
    auto block = std::lower_bound(blocks_.begin(), blocks_.end(), e,
                                  [](const std::vector<Entry>& b, const Entry& x) { return before(b.back(), x); });
    if (block != blocks_.end()) {
      auto pos = std::lower_bound(block->begin(), block->end(), e, before);
      if (pos != block->end() && pos->seq == e.seq) {
        return {static_cast<std::size_t>(block - blocks_.begin()), static_cast<std::size_t>(pos - block->begin())};
      }
    }
    throw std::logic_error("RankIndex: entry not found");
  }

  std::vector<std::vector<Entry>> blocks_;
  std::size_t size_ = 0;
};

/// Handle to a stored transition; goes stale once the slot is overwritten.
struct ReplayHandle {
  int slot = 0;
  std::uint64_t seq = 0;
};

struct ReplaySample {
  std::vector<ReplayHandle> handles;
  std::vector<double> weights;  // importance-sampling weights, max-normalized
};

/// Rank-based prioritized replay. Priority p_i = 1/rank(i) by |TD error|,
/// sampled with P(i) = p_i^alpha / sum_k p_k^alpha. alpha = 0 gives the
/// plain uniform memory (sampling by slot, weights all one).
class PrioritizedBuffer {
 public:
  explicit PrioritizedBuffer(int capacity, double alpha = 0.6) : capacity_(capacity), alpha_(alpha) {
    if (capacity < 1) throw std::invalid_argument("replay: capacity must be positive");
    if (alpha < 0.0) throw std::invalid_argument("replay: alpha must be nonnegative");
    slots_.reserve(static_cast<std::size_t>(std::min(capacity, 1 << 16)));
    rank_mass_.resize(static_cast<std::size_t>(capacity) + 1, 0.0);
    for (int k = 1; k <= capacity; ++k) {
      rank_mass_[static_cast<std::size_t>(k)] = rank_mass_[static_cast<std::size_t>(k - 1)] + std::pow(k, -alpha);
    }
  }

  /// Stores a transition ahead of every already-replayed one; the oldest is
  /// evicted when full.
  void push(Transition t) {
    int slot;
    if (size() < capacity_) {
      slot = static_cast<int>(slots_.size());
      slots_.push_back({});
    } else {
      slot = oldest_;
      index_.erase(entry(slot));
      oldest_ = (oldest_ + 1) % capacity_;
    }
    auto& s = slots_[static_cast<std::size_t>(slot)];
    s.transition = std::move(t);
    s.seq = next_seq_++;
    s.key = std::numeric_limits<double>::infinity();
    index_.insert(entry(slot));
  }

  ReplaySample sample(int batch_size, double beta, Rng& rng) const {
    if (batch_size < 1 || batch_size > size()) throw std::invalid_argument("replay: not enough transitions to sample");
    ReplaySample out;
    out.handles.reserve(static_cast<std::size_t>(batch_size));
    out.weights.reserve(static_cast<std::size_t>(batch_size));
    const int m = size();
    const double total = rank_mass_[static_cast<std::size_t>(m)];
    const double min_p = std::pow(m, -alpha_) / total;
    const double max_w = std::pow(m * min_p, -beta);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < batch_size; ++i) {
      int slot;
      double p;
      if (alpha_ == 0.0) {
        slot = std::uniform_int_distribution<int>(0, m - 1)(rng);
        p = 1.0 / m;
      } else {
        const double u = unit(rng) * total;
        auto it = std::upper_bound(rank_mass_.begin() + 1, rank_mass_.begin() + m + 1, u);
        const int rank = std::min(static_cast<int>(it - rank_mass_.begin()), m);
        slot = index_.select(static_cast<std::size_t>(rank - 1)).slot;
        p = std::pow(rank, -alpha_) / total;
      }
      out.handles.push_back({slot, slots_[static_cast<std::size_t>(slot)].seq});
      out.weights.push_back(std::pow(m * p, -beta) / max_w);
    }
    return out;
  }

  void update_priorities(const std::vector<ReplayHandle>& handles, const std::vector<double>& td_abs) {
    if (handles.size() != td_abs.size()) throw std::invalid_argument("replay: handles/errors size mismatch");
    for (std::size_t i = 0; i < handles.size(); ++i) {
      const auto& h = handles[i];
      if (h.slot < 0 || h.slot >= size() || slots_[static_cast<std::size_t>(h.slot)].seq != h.seq) {
        throw std::logic_error("replay: stale transition handle");
      }
      index_.erase(entry(h.slot));
      slots_[static_cast<std::size_t>(h.slot)].key = std::abs(td_abs[i]);
      index_.insert(entry(h.slot));
    }
  }

  const Transition& at(const ReplayHandle& h) const {
    const auto& s = slots_.at(static_cast<std::size_t>(h.slot));
    if (s.seq != h.seq) throw std::logic_error("replay: stale transition handle");
    return s.transition;
  }

  /// 1-based priority rank of a stored slot.
  int rank_of_slot(int slot) const { return static_cast<int>(index_.rank_of(entry(slot))) + 1; }

  /// Exact sampling probability of a stored slot.
  double probability(int slot) const {
    const int m = size();
    if (alpha_ == 0.0) return 1.0 / m;
    return std::pow(rank_of_slot(slot), -alpha_) / rank_mass_[static_cast<std::size_t>(m)];
  }

  /// Slot holding the n-th oldest live transition (0 = oldest).
  int slot_by_age(int n) const { return size() < capacity_ ? n : (oldest_ + n) % capacity_; }
  std::uint64_t seq_of_slot(int slot) const { return slots_.at(static_cast<std::size_t>(slot)).seq; }

  int size() const noexcept { return static_cast<int>(slots_.size()); }
  int capacity() const noexcept { return capacity_; }
  double alpha() const noexcept { return alpha_; }

 private:
  struct Slot {
    Transition transition;
    std::uint64_t seq = 0;
    double key = 0.0;
  };

  RankIndex::Entry entry(int slot) const {
    const auto& s = slots_[static_cast<std::size_t>(slot)];
    return {s.key, s.seq, slot};
  }

  int capacity_;
  double alpha_;
  std::vector<Slot> slots_;
  std::vector<double> rank_mass_;  // rank_mass_[k] = sum_{j<=k} j^-alpha
  RankIndex index_;
  int oldest_ = 0;
  std::uint64_t next_seq_ = 0;
};

/// Linear anneal of the IS exponent from beta0 to 1 over `horizon` steps.
inline double annealed_beta(double beta0, long long step, long long horizon) {
  if (horizon <= 0) return 1.0;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(horizon));
  return beta0 + (1.0 - beta0) * frac;
}

}  // namespace mealrl

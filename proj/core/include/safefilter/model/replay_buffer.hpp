#pragma once

#include "safefilter/common.hpp"
#include "safefilter/random.hpp"

#include <deque>
#include <iosfwd>
#include <vector>

namespace safefilter::model {

struct Transition {
  Vec x;
  Vec u;
  Vec xp;
};

/// FIFO transition store with bounded capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  const Transition& at(std::size_t i) const { return data_.at(i); }

  /// Bootstrap resample of indices (size() draws with replacement).
  std::vector<std::size_t> bootstrap_indices(RandomSource& rng) const;

  void write_csv(std::ostream& out) const;
  static ReplayBuffer read_csv(std::istream& in, std::size_t capacity = 100000);

 private:
  std::size_t capacity_;
  std::deque<Transition> data_;
};

}  // namespace safefilter::model

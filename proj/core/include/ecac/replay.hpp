#pragma once

#include <cstdint>
#include <vector>

#include "ecac/array.hpp"
#include "ecac/rng.hpp"

namespace ecac {

struct Transition {
  Array state;
  Array action;
  double reward = 0.0;  // already multiplied by the reward scale
  Array next_state;
  bool terminal = false;
};

// Column-stacked minibatch. `terminals` holds 1.0 for terminal transitions.
struct Batch {
  Array states;       // [n, obs]
  Array actions;      // [n, act]
  Array rewards;      // [n]
  Array next_states;  // [n, obs]
  Array terminals;    // [n]
  std::vector<std::uint64_t> tags;  // insertion index of each sampled transition

  std::size_t size() const { return rewards.size(); }
};

Batch make_batch(const std::vector<Transition>& transitions);

// Fixed-capacity FIFO ring of transitions with uniform sampling with replacement.
class ReplayBuffer {
 public:
  static constexpr std::size_t kDefaultCapacity = 500'000;

  explicit ReplayBuffer(std::size_t capacity = kDefaultCapacity);

  // The first push fixes the state and action dimensions.
  void push(const Transition& t);
  Batch sample_uniform(std::size_t n, Rng& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return size_ == 0; }
  std::uint64_t total_pushed() const { return total_; }

  // Slot i counts from the oldest stored transition (0) to the newest (size-1).
  Transition at(std::size_t i) const;
  std::uint64_t tag_at(std::size_t i) const;

 private:
  std::size_t physical(std::size_t i) const;

  std::size_t capacity_;
  std::size_t obs_dim_ = 0;
  std::size_t act_dim_ = 0;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  std::uint64_t total_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<unsigned char> terminals_;
  std::vector<std::uint64_t> tags_;
};

}  // namespace ecac

#include "ecac/replay.hpp"

#include <algorithm>
#include <cmath>

#include "ecac/errors.hpp"

namespace ecac {

Batch make_batch(const std::vector<Transition>& transitions) {
  if (transitions.empty()) throw Error("make_batch: no transitions");
  const auto obs = transitions[0].state.size();
  const auto act = transitions[0].action.size();
  const auto n = transitions.size();
  Batch b{Array::zeros({n, obs}), Array::zeros({n, act}), Array::zeros({n}), Array::zeros({n, obs}),
          Array::zeros({n}), std::vector<std::uint64_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = transitions[i];
    if (t.state.size() != obs || t.next_state.size() != obs || t.action.size() != act) {
      throw ShapeError("make_batch: transition " + std::to_string(i) + " has inconsistent dimensions");
    }
    std::copy_n(t.state.data(), obs, b.states.data() + i * obs);
    std::copy_n(t.next_state.data(), obs, b.next_states.data() + i * obs);
    std::copy_n(t.action.data(), act, b.actions.data() + i * act);
    b.rewards[i] = t.reward;
    b.terminals[i] = t.terminal ? 1.0 : 0.0;
    b.tags[i] = i;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("replay capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != t.next_state.size()) {
    throw ShapeError("transition state " + shape_to_string(t.state.shape()) + " vs next state " +
                     shape_to_string(t.next_state.shape()));
  }
  if (!std::isfinite(t.reward)) throw NumericError("transition reward is not finite");
  if (total_ == 0) {
    obs_dim_ = t.state.size();
    act_dim_ = t.action.size();
    // Storage grows on demand up to capacity.
    const auto reserve = std::min<std::size_t>(capacity_, 1024);
    states_.reserve(reserve * obs_dim_);
    next_states_.reserve(reserve * obs_dim_);
    actions_.reserve(reserve * act_dim_);
  } else if (t.state.size() != obs_dim_ || t.action.size() != act_dim_) {
    throw ShapeError("transition dimensions (state " + std::to_string(t.state.size()) + ", action " +
                     std::to_string(t.action.size()) + ") differ from the buffer's (state " +
                     std::to_string(obs_dim_) + ", action " + std::to_string(act_dim_) + ")");
  }
  if (size_ < capacity_) {
    states_.insert(states_.end(), t.state.values().begin(), t.state.values().end());
    next_states_.insert(next_states_.end(), t.next_state.values().begin(), t.next_state.values().end());
    actions_.insert(actions_.end(), t.action.values().begin(), t.action.values().end());
    rewards_.push_back(t.reward);
    terminals_.push_back(t.terminal ? 1 : 0);
    tags_.push_back(total_);
    ++size_;
  } else {
    std::copy_n(t.state.data(), obs_dim_, states_.data() + cursor_ * obs_dim_);
    std::copy_n(t.next_state.data(), obs_dim_, next_states_.data() + cursor_ * obs_dim_);
    std::copy_n(t.action.data(), act_dim_, actions_.data() + cursor_ * act_dim_);
    rewards_[cursor_] = t.reward;
    terminals_[cursor_] = t.terminal ? 1 : 0;
    tags_[cursor_] = total_;
  }
  cursor_ = (cursor_ + 1) % capacity_;
  ++total_;
}

std::size_t ReplayBuffer::physical(std::size_t i) const {
  if (i >= size_) throw Error("replay slot out of range");
  // Before the ring wraps, cursor_ == size_ and the oldest entry is at 0.
  return size_ < capacity_ ? i : (cursor_ + i) % capacity_;
}

Transition ReplayBuffer::at(std::size_t i) const {
  const auto p = physical(i);
  Transition t;
  t.state = Array::vector({states_.begin() + static_cast<std::ptrdiff_t>(p * obs_dim_),
                           states_.begin() + static_cast<std::ptrdiff_t>((p + 1) * obs_dim_)});
  t.next_state = Array::vector({next_states_.begin() + static_cast<std::ptrdiff_t>(p * obs_dim_),
                                next_states_.begin() + static_cast<std::ptrdiff_t>((p + 1) * obs_dim_)});
  t.action = Array::vector({actions_.begin() + static_cast<std::ptrdiff_t>(p * act_dim_),
                            actions_.begin() + static_cast<std::ptrdiff_t>((p + 1) * act_dim_)});
  t.reward = rewards_[p];
  t.terminal = terminals_[p] != 0;
  return t;
}

std::uint64_t ReplayBuffer::tag_at(std::size_t i) const { return tags_[physical(i)]; }

Batch ReplayBuffer::sample_uniform(std::size_t n, Rng& rng) const {
  if (size_ == 0) throw Error("cannot sample from an empty replay buffer");
  if (n == 0) throw Error("batch size must be positive");
  Batch b{Array::zeros({n, obs_dim_}), Array::zeros({n, act_dim_}), Array::zeros({n}), Array::zeros({n, obs_dim_}),
          Array::zeros({n}), std::vector<std::uint64_t>(n, 0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<std::size_t>(rng.below(size_));
    std::copy_n(states_.data() + p * obs_dim_, obs_dim_, b.states.data() + i * obs_dim_);
    std::copy_n(next_states_.data() + p * obs_dim_, obs_dim_, b.next_states.data() + i * obs_dim_);
    std::copy_n(actions_.data() + p * act_dim_, act_dim_, b.actions.data() + i * act_dim_);
    b.rewards[i] = rewards_[p];
    b.terminals[i] = terminals_[p] ? 1.0 : 0.0;
    b.tags[i] = tags_[p];
  }
  return b;
}

}  // namespace ecac

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mbrl/types.hpp"

namespace mbrl {

// Bounded FIFO buffer of transitions; oldest entry evicted at capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2000) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void push(const Transition& t) {
    if (data_.size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  // i = 0 is the oldest retained transition
  const Transition& operator[](std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("ReplayBuffer: index out of range");
    return data_[(head_ + i) % data_.size()];
  }

  // Training matrices: rows of X are (s, a), rows of Y are s' - s.
  void to_matrices(Mat& X, Mat& Y) const {
    if (empty()) throw std::invalid_argument("ReplayBuffer: empty buffer");
    const auto& first = (*this)[0];
    const int sd = static_cast<int>(first.state.size());
    const int ad = static_cast<int>(first.action.size());
    X.resize(static_cast<int>(size()), sd + ad);
    Y.resize(static_cast<int>(size()), sd);
    for (std::size_t i = 0; i < size(); ++i) {
      const Transition& t = (*this)[i];
      X.row(i).head(sd) = t.state.transpose();
      X.row(i).tail(ad) = t.action.transpose();
      Y.row(i) = (t.next_state - t.state).transpose();
    }
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> data_;
};

}  // namespace mbrl

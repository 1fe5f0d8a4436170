#pragma once

#include <cstddef>
#include <vector>

#include "deskrl/rng.hpp"

namespace deskrl {

struct Transition {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
    bool done = false;
};

/// Contiguous n-step window starting at a sampled transition. Holds the
/// visited state sequence (effective_n + 1 entries), the actions and
/// rewards along it, and whether the window ends at a terminal.
struct NStepWindow {
    std::vector<int> states;  // s_t .. s_{t+effective_n}
    std::vector<int> actions; // a_t .. a_{t+effective_n-1}
    std::vector<double> rewards;
    int effective_n = 0;
    bool done = false;
};

/// Ring buffer of transitions with uniform n-step window sampling. Windows
/// never cross an episode boundary: they truncate at a done transition or
/// at the newest element.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    const Transition& at_logical(std::size_t i) const; // 0 = oldest

    /// Uniform over stored transitions; throws std::runtime_error on an
    /// empty buffer. n >= 1.
    NStepWindow sample_window(int n, Rng& rng) const;
    std::vector<NStepWindow> sample_batch(int batch, int n, Rng& rng) const;

  private:
    std::size_t slot(std::size_t logical) const { return (head_ + logical) % capacity_; }

    std::size_t capacity_;
    std::size_t head_ = 0; // slot of the oldest element
    std::size_t size_ = 0;
    std::vector<Transition> data_;
    std::vector<std::uint64_t> episode_;
    std::uint64_t episode_counter_ = 0;
};

} // namespace deskrl

#include "deskrl/replay.hpp"

#include <stdexcept>

namespace deskrl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: capacity must be positive");
    data_.resize(capacity);
    episode_.resize(capacity);
}

void ReplayBuffer::push(const Transition& t) {
    const std::size_t s = size_ < capacity_ ? slot(size_) : head_;
    data_[s] = t;
    episode_[s] = episode_counter_;
    if (size_ < capacity_) {
        ++size_;
    } else {
        head_ = (head_ + 1) % capacity_;
    }
    if (t.done) ++episode_counter_;
}

const Transition& ReplayBuffer::at_logical(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("replay: logical index out of range");
    return data_[slot(i)];
}

NStepWindow ReplayBuffer::sample_window(int n, Rng& rng) const {
    if (size_ == 0) throw std::runtime_error("replay: cannot sample from an empty buffer");
    if (n < 1) throw std::invalid_argument("replay: n must be at least 1");

    const std::size_t start = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(size_)));
    const std::uint64_t ep = episode_[slot(start)];

    NStepWindow w;
    w.states.push_back(data_[slot(start)].state);
    for (int k = 0; k < n; ++k) {
        const std::size_t logical = start + k;
        if (logical >= size_) break;
        const Transition& t = data_[slot(logical)];
        if (episode_[slot(logical)] != ep) break;
        w.actions.push_back(t.action);
        w.rewards.push_back(t.reward);
        w.states.push_back(t.next_state);
        w.effective_n += 1;
        w.done = t.done;
        if (t.done) break;
    }
    return w;
}

std::vector<NStepWindow> ReplayBuffer::sample_batch(int batch, int n, Rng& rng) const {
    std::vector<NStepWindow> out;
    out.reserve(batch);
    for (int i = 0; i < batch; ++i) out.push_back(sample_window(n, rng));
    return out;
}

} // namespace deskrl

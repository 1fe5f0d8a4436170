#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace deskrl {

/// Geometric interpolation start -> end over T steps, clamped at end.
inline double exp_schedule(double start, double end, std::int64_t t, std::int64_t T) {
    if (!(start > 0.0) || !(end > 0.0)) throw std::invalid_argument("exp_schedule: endpoints must be positive");
    if (T <= 0) throw std::invalid_argument("exp_schedule: horizon must be positive");
    if (t >= T) return end;
    if (t <= 0) return start;
    const double frac = static_cast<double>(t) / static_cast<double>(T);
    return start * std::pow(end / start, frac);
}

/// Linear decay beta0 -> 0 by anneal_end, pinned to exactly 0 for the
/// final `freeze` updates (and anywhere past anneal_end).
inline double beta_schedule(double beta0, std::int64_t anneal_end, std::int64_t total_updates,
                            std::int64_t freeze, std::int64_t t) {
    if (beta0 < 0.0) throw std::invalid_argument("beta_schedule: beta0 must be nonnegative");
    if (anneal_end < 0 || freeze < 0 || total_updates <= 0)
        throw std::invalid_argument("beta_schedule: negative schedule bounds");
    if (anneal_end > total_updates - freeze)
        throw std::invalid_argument("beta_schedule: anneal_end must not overlap the freeze window");
    if (t >= total_updates - freeze) return 0.0;
    if (t >= anneal_end || anneal_end == 0) return 0.0;
    return beta0 * (1.0 - static_cast<double>(t) / static_cast<double>(anneal_end));
}

} // namespace deskrl

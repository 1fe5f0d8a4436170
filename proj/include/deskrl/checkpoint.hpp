#pragma once

#include <cstdint>
#include <string>

#include "deskrl/agent.hpp"
#include "deskrl/config.hpp"

namespace deskrl {

/// Versioned text container: config echo, both parameter sets, optimizer
/// state, and loop counters. Values are stored as hex floats, so a
/// save/load round trip is bit-exact. Loading any other version fails.
struct Checkpoint {
    static constexpr int kVersion = 1;

    std::string config_echo;
    AgentNets nets;
    OptimState optim;
    std::int64_t env_steps = 0;
    std::int64_t updates = 0;
    std::int64_t updates_since_reset = 0;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

} // namespace deskrl

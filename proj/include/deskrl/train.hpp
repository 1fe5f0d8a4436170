#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deskrl/checkpoint.hpp"
#include "deskrl/config.hpp"
#include "deskrl/mdp.hpp"

namespace deskrl {

struct RunArtifacts {
    std::string out_dir;
    std::string checkpoint_path;
    std::string score_log_path;
    std::string diagnostics_path;
    std::string config_echo_path;
    std::uint64_t seed = 0;
    std::int64_t env_steps = 0;
    std::int64_t updates = 0;
    std::vector<double> eval_returns;
};

TabularMDP build_env(const TrainConfig& cfg);

/// Full training loop: env stepping interleaved with replay-ratio-many
/// gradient updates, exponential n/gamma schedules restarted at every
/// shrink-and-perturb reset, EMA target updates after each step, beta
/// annealing with the terminal freeze window, then the evaluation pass.
/// Deterministic per (config, seed). Throws on non-finite losses after
/// writing a diagnostic snapshot next to the artifacts.
RunArtifacts run_training(const TrainConfig& cfg, const std::string& out_dir);

/// Episode returns under frozen checkpoint parameters. Action selection
/// uses the checkpoint's target policy; `episodes` may be zero.
std::vector<double> evaluate(const Checkpoint& ck, int episodes, ActionMode mode, Rng& rng);
std::vector<double> evaluate_checkpoint(const std::string& path, int episodes, ActionMode mode,
                                        std::uint64_t seed);

} // namespace deskrl

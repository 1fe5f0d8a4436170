#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "deskrl/rng.hpp"

namespace deskrl {

/// Explicit finite MDP. Transition tensor is row-major over (state, action,
/// next_state); rewards are expected values per (state, action). Terminal
/// states self-loop with reward zero under every action.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition; // (s, a, s') flattened
    std::vector<double> reward;     // (s, a)
    std::vector<double> initial_dist;
    std::vector<std::uint8_t> terminal;
    double gamma = 0.99;
    double r_min = 0.0;
    double r_max = 0.0;
    int episode_cap = 500;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double& p_ref(int s, int a, int s2) {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_actions + a]; }
    bool is_terminal(int s) const { return terminal[s] != 0; }

    // Derive [r_min, r_max] from the stored reward matrix.
    void refresh_reward_bounds();

    /// Checks row-stochasticity (1e-12), initial-distribution normalization,
    /// reward bounds, gamma range, and the terminal self-loop convention.
    /// Throws std::invalid_argument on the first violation.
    void validate() const;
};

struct EnvState {
    int state_id = 0;
    int step_count = 0;
    bool done = false;
};

struct StepResult {
    int next_state = 0;
    double reward = 0.0;
    bool done = false;
};

/// Four-action gridworld (up/down/left/right) with wall bounce. With
/// probability slip_prob the executed action is replaced by a uniformly
/// random one. The goal cell is terminal; entering it yields goal_reward,
/// every other move yields step_reward. State id = y * width + x.
TabularMDP build_gridworld(int width, int height, int goal_x, int goal_y, double step_reward,
                           double goal_reward, double slip_prob, double gamma = 0.99);

/// Deterministic two-action chain (0 = left, 1 = right); the rightmost state
/// is terminal and entering it yields right_reward.
TabularMDP build_chain(int length, double right_reward, double gamma);

/// Dense random MDP without terminal states: Dirichlet-like transition rows,
/// rewards uniform in [-1, 1], uniform initial distribution.
TabularMDP build_random_mdp(int n_states, int n_actions, double gamma, Rng& rng);

EnvState env_reset(const TabularMDP& mdp, Rng& rng);

/// Samples one transition. Throws std::logic_error when called on a done
/// state. Truncation at the episode cap marks the state done.
StepResult env_step(const TabularMDP& mdp, EnvState& st, int action, Rng& rng);

void save_mdp(const TabularMDP& mdp, std::ostream& out);
TabularMDP load_mdp(std::istream& in);
TabularMDP load_mdp_file(const std::string& path);
void save_mdp_file(const TabularMDP& mdp, const std::string& path);

} // namespace deskrl

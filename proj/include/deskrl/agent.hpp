#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deskrl/nn.hpp"
#include "deskrl/optim.hpp"
#include "deskrl/replay.hpp"

namespace deskrl {

struct NetSpec {
    int obs_dim = 0;
    int n_actions = 0;
    int hidden = 128;
    int latent = 64;
    int proj = 32;
};

/// Online and target parameter stores plus the tape builders for every head.
/// Online groups: encoder, qhead, policy, transition, proj_q, proj_pi,
/// pred_q, pred_pi. The target set carries EMA copies of encoder, qhead,
/// policy and both projections; predictors and the transition model have no
/// target counterpart.
struct AgentNets {
    NetSpec spec;
    ParamSet online;
    ParamSet target;

    static AgentNets create(const NetSpec& spec, Rng& rng);

    static const std::vector<std::string>& target_groups();
    static const std::vector<std::string>& encoder_reset_groups();
    static const std::vector<std::string>& head_reset_groups();

    Tape::NodeId encode(Tape& t, Tape::NodeId obs, bool use_target, bool trainable) const;
    Tape::NodeId q_head(Tape& t, Tape::NodeId latent, bool use_target, bool trainable) const;
    Tape::NodeId policy_head(Tape& t, Tape::NodeId latent, bool use_target, bool trainable) const;

    /// Value-only batch forwards over one-hot encoded state ids.
    Tensor latents(const std::vector<int>& states, bool use_target) const;
    Tensor q_values(const std::vector<int>& states, bool use_target) const;
    Tensor policy_probs(const std::vector<int>& states, bool use_target) const;

    void sync_target_to_online();
};

/// Batch-of-states -> BxA value matrix.
using ValueFn = std::function<Tensor(const std::vector<int>&)>;

/// n-step bootstrapped targets: discounted reward sum plus, unless the
/// window terminated, gamma^effective_n * Q_target(s_final, a') with a'
/// drawn fresh from the online policy at s_final. Pure values, no gradient.
std::vector<double> nstep_targets(const std::vector<NStepWindow>& batch, double gamma,
                                  const ValueFn& q_target, const ValueFn& policy_probs, Rng& rng);

/// Convenience wrapper binding the agent's target critic and online policy.
std::vector<double> nstep_targets(const std::vector<NStepWindow>& batch, double gamma,
                                  const AgentNets& nets, Rng& rng);

/// Mean elementwise Huber loss between Q(s_t, a_t) and the fixed targets.
/// Throws std::runtime_error on a non-finite target.
Tape::NodeId critic_loss(Tape& t, const AgentNets& nets, const std::vector<int>& states,
                         const std::vector<int>& actions, const std::vector<double>& targets,
                         double delta = 1.0);

enum class PgMode { Sampled, Exact };

struct PolicyGradEstimate {
    GradMap grad; // ascent direction for the policy head
    double mean_advantage = 0.0;
    double entropy = 0.0; // diagnostic, clamped to [0, log A]
    double baseline = 0.0;
};

/// Score-function gradient of E_{a~pi_theta}[Q] plus beta times the exact
/// softmax entropy gradient. In Sampled mode one fresh action per state is
/// drawn from the current policy (never a replayed action); Exact mode
/// enumerates all actions. With use_baseline the per-state control variate
/// sum_a pi(a|s) * Q(s,a) is subtracted from Q, with both factors treated
/// as constants.
PolicyGradEstimate policy_gradient(const Tensor& features, const Tensor& q_ref, const ParamSet& params,
                                   const std::string& head, double beta, PgMode mode, bool use_baseline,
                                   Rng& rng);

enum class ActionMode { Sample, Greedy };

/// Action from the target-parameter policy at the given state. Greedy mode
/// breaks ties toward the lowest action index.
int select_action(const AgentNets& nets, int state_id, ActionMode mode, Rng& rng);

int argmax_lowest(const double* v, int n);

} // namespace deskrl

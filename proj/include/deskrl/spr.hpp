#pragma once

#include <vector>

#include "deskrl/agent.hpp"

namespace deskrl {

/// Latent rollout through the action-conditioned transition model together
/// with the online predictions and target projections the prediction loss
/// compares. Target-path nodes are built from the EMA parameter set as
/// constants, so no gradient ever reaches them.
struct LatentRollout {
    int horizon = 0;
    int batch = 0;
    std::vector<Tape::NodeId> predicted_latents; // z_{t+1} .. z_{t+k}
    std::vector<Tape::NodeId> online_x;          // predictor(projection(z)) on the Q path
    std::vector<Tape::NodeId> online_y;          // same on the policy path
    std::vector<Tape::NodeId> target_x;          // target projection of encoded true states
    std::vector<Tape::NodeId> target_y;
    std::vector<Tensor> step_mask; // Bx1 weights, empty means all-ones
};

/// Core recurrence: z_{t+1} = model(z_t, a_t), one-hot action concatenated
/// to the latent before the affine transition map. actions[j] holds the
/// batch of actions for step j.
std::vector<Tape::NodeId> rollout_latents(Tape& t, const AgentNets& nets, Tape::NodeId z0,
                                          const std::vector<std::vector<int>>& actions);

/// Full rollout from observed state ids. future_states[j] are the true
/// states s_{t+j+1}; step_mask (optional) zeroes steps past a window's end.
LatentRollout build_spr_rollout(Tape& t, const AgentNets& nets, const std::vector<int>& states_t,
                                const std::vector<std::vector<int>>& actions,
                                const std::vector<std::vector<int>>& future_states,
                                const std::vector<Tensor>* step_mask = nullptr);

/// -(1/2k) * sum over steps and both branches of the normalized cosine
/// between online prediction and target projection, averaged over the
/// batch. Value lies in [-1, 1]; norms are clamped below at 1e-8.
Tape::NodeId spr_loss(Tape& t, const LatentRollout& rollout);

/// Batch assembly from replay windows for a fixed horizon k: step j is
/// masked out for windows shorter than j+1 steps.
struct SprBatch {
    std::vector<int> states_t;
    std::vector<std::vector<int>> actions;
    std::vector<std::vector<int>> future_states;
    std::vector<Tensor> step_mask;
    int horizon = 0;
};

SprBatch spr_batch_from_windows(const std::vector<NStepWindow>& windows, int k);

} // namespace deskrl

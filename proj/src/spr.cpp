#include "deskrl/spr.hpp"

#include <stdexcept>

namespace deskrl {

std::vector<Tape::NodeId> rollout_latents(Tape& t, const AgentNets& nets, Tape::NodeId z0,
                                          const std::vector<std::vector<int>>& actions) {
    std::vector<Tape::NodeId> out;
    Tape::NodeId z = z0;
    for (const std::vector<int>& step_actions : actions) {
        Tape::NodeId a = t.input(one_hot_batch(step_actions, nets.spec.n_actions));
        z = affine(t, nets.online, "transition", t.concat_cols(z, a), true);
        out.push_back(z);
    }
    return out;
}

LatentRollout build_spr_rollout(Tape& t, const AgentNets& nets, const std::vector<int>& states_t,
                                const std::vector<std::vector<int>>& actions,
                                const std::vector<std::vector<int>>& future_states,
                                const std::vector<Tensor>* step_mask) {
    if (actions.empty()) throw std::invalid_argument("spr rollout: horizon must be at least 1");
    if (actions.size() != future_states.size())
        throw std::invalid_argument("spr rollout: horizon exceeds the stored window");

    LatentRollout r;
    r.horizon = static_cast<int>(actions.size());
    r.batch = static_cast<int>(states_t.size());

    Tape::NodeId obs = t.input(one_hot_batch(states_t, nets.spec.obs_dim));
    Tape::NodeId z0 = nets.encode(t, obs, false, true);
    r.predicted_latents = rollout_latents(t, nets, z0, actions);

    for (int j = 0; j < r.horizon; ++j) {
        Tape::NodeId z = r.predicted_latents[j];
        r.online_x.push_back(affine(t, nets.online, "pred_q", affine(t, nets.online, "proj_q", z, true), true));
        r.online_y.push_back(affine(t, nets.online, "pred_pi", affine(t, nets.online, "proj_pi", z, true), true));

        Tape::NodeId fut = t.input(one_hot_batch(future_states[j], nets.spec.obs_dim));
        Tape::NodeId zt = nets.encode(t, fut, true, false);
        r.target_x.push_back(affine(t, nets.target, "proj_q", zt, false));
        r.target_y.push_back(affine(t, nets.target, "proj_pi", zt, false));
    }
    if (step_mask) r.step_mask = *step_mask;
    return r;
}

Tape::NodeId spr_loss(Tape& t, const LatentRollout& rollout) {
    if (rollout.horizon < 1) throw std::invalid_argument("spr_loss: empty rollout");

    Tape::NodeId acc = -1;
    for (int j = 0; j < rollout.horizon; ++j) {
        Tape::NodeId cx = t.cosine_rows(rollout.online_x[j], rollout.target_x[j]);
        Tape::NodeId cy = t.cosine_rows(rollout.online_y[j], rollout.target_y[j]);
        Tape::NodeId step = t.add(cx, cy);
        if (!rollout.step_mask.empty()) step = t.mul(step, t.input(rollout.step_mask[j]));
        Tape::NodeId s = t.sum_all(step);
        acc = acc < 0 ? s : t.add(acc, s);
    }
    return t.scale(acc, -1.0 / (2.0 * rollout.horizon * rollout.batch));
}

SprBatch spr_batch_from_windows(const std::vector<NStepWindow>& windows, int k) {
    if (k < 1) throw std::invalid_argument("spr batch: horizon must be at least 1");
    SprBatch b;
    b.horizon = k;
    const int B = static_cast<int>(windows.size());
    for (const NStepWindow& w : windows) b.states_t.push_back(w.states.front());
    b.actions.assign(k, std::vector<int>(B, 0));
    b.future_states.assign(k, std::vector<int>(B, 0));
    b.step_mask.assign(k, Tensor(B, 1));
    for (int r = 0; r < B; ++r) {
        const NStepWindow& w = windows[r];
        for (int j = 0; j < k; ++j) {
            if (j < w.effective_n) {
                b.actions[j][r] = w.actions[j];
                b.future_states[j][r] = w.states[j + 1];
                b.step_mask[j].data[r] = 1.0;
            } else {
                // placeholder, masked out of the loss
                b.actions[j][r] = w.actions.empty() ? 0 : w.actions.back();
                b.future_states[j][r] = w.states.back();
                b.step_mask[j].data[r] = 0.0;
            }
        }
    }
    return b;
}

} // namespace deskrl

#include "deskrl/agent.hpp"

#include <cmath>
#include <stdexcept>

namespace deskrl {

AgentNets AgentNets::create(const NetSpec& spec, Rng& rng) {
    AgentNets nets;
    nets.spec = spec;

    ParamSet& on = nets.online;
    add_affine(on, "encoder/l0", spec.obs_dim, spec.hidden, rng);
    add_affine(on, "encoder/l1", spec.hidden, spec.hidden, rng);
    add_affine(on, "encoder/l2", spec.hidden, spec.latent, rng);
    add_affine(on, "qhead", spec.latent, spec.n_actions, rng);
    add_affine(on, "policy", spec.latent, spec.n_actions, rng);
    add_affine(on, "transition", spec.latent + spec.n_actions, spec.latent, rng);
    add_affine(on, "proj_q", spec.latent, spec.proj, rng);
    add_affine(on, "proj_pi", spec.latent, spec.proj, rng);
    add_affine(on, "pred_q", spec.proj, spec.proj, rng);
    add_affine(on, "pred_pi", spec.proj, spec.proj, rng);

    // Target tensors mirror the EMA'd groups and start equal to online.
    Rng dummy(0);
    for (const std::string& name : on.group_names(target_groups())) {
        const Tensor& src = on.get(name);
        nets.target.define(name, src.rows, src.cols, on.init_of(name), dummy);
        nets.target.get(name) = src;
    }
    return nets;
}

const std::vector<std::string>& AgentNets::target_groups() {
    static const std::vector<std::string> g = {"encoder", "qhead", "policy", "proj_q", "proj_pi"};
    return g;
}

const std::vector<std::string>& AgentNets::encoder_reset_groups() {
    static const std::vector<std::string> g = {"encoder"};
    return g;
}

const std::vector<std::string>& AgentNets::head_reset_groups() {
    static const std::vector<std::string> g = {"qhead",  "policy", "transition",
                                               "proj_q", "proj_pi", "pred_q", "pred_pi"};
    return g;
}

Tape::NodeId AgentNets::encode(Tape& t, Tape::NodeId obs, bool use_target, bool trainable) const {
    const ParamSet& ps = use_target ? target : online;
    Tape::NodeId h = t.relu(affine(t, ps, "encoder/l0", obs, trainable));
    h = t.relu(affine(t, ps, "encoder/l1", h, trainable));
    return affine(t, ps, "encoder/l2", h, trainable);
}

Tape::NodeId AgentNets::q_head(Tape& t, Tape::NodeId latent, bool use_target, bool trainable) const {
    return affine(t, use_target ? target : online, "qhead", latent, trainable);
}

Tape::NodeId AgentNets::policy_head(Tape& t, Tape::NodeId latent, bool use_target, bool trainable) const {
    return affine(t, use_target ? target : online, "policy", latent, trainable);
}

Tensor AgentNets::latents(const std::vector<int>& states, bool use_target) const {
    Tape t;
    Tape::NodeId obs = t.input(one_hot_batch(states, spec.obs_dim));
    return t.value(encode(t, obs, use_target, false));
}

Tensor AgentNets::q_values(const std::vector<int>& states, bool use_target) const {
    Tape t;
    Tape::NodeId obs = t.input(one_hot_batch(states, spec.obs_dim));
    return t.value(q_head(t, encode(t, obs, use_target, false), use_target, false));
}

Tensor AgentNets::policy_probs(const std::vector<int>& states, bool use_target) const {
    Tape t;
    Tape::NodeId obs = t.input(one_hot_batch(states, spec.obs_dim));
    Tape::NodeId logits = policy_head(t, encode(t, obs, use_target, false), use_target, false);
    return t.value(t.softmax_rows(logits));
}

void AgentNets::sync_target_to_online() { ema_update(target, online, 0.0); }

std::vector<double> nstep_targets(const std::vector<NStepWindow>& batch, double gamma,
                                  const ValueFn& q_target, const ValueFn& policy_probs, Rng& rng) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("nstep_targets: gamma must lie in [0, 1)");

    std::vector<double> targets(batch.size(), 0.0);
    std::vector<int> boot_states;
    std::vector<std::size_t> boot_rows;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const NStepWindow& w = batch[i];
        double g = 0.0;
        double scale = 1.0;
        for (int k = 0; k < w.effective_n; ++k) {
            g += scale * w.rewards[k];
            scale *= gamma;
        }
        targets[i] = g;
        if (!w.done) {
            boot_rows.push_back(i);
            boot_states.push_back(w.states.back());
        }
    }

    if (!boot_rows.empty()) {
        const Tensor probs = policy_probs(boot_states);
        const Tensor qv = q_target(boot_states);
        for (std::size_t j = 0; j < boot_rows.size(); ++j) {
            const std::size_t i = boot_rows[j];
            const int a = rng.categorical(&probs.data[j * probs.cols], probs.cols);
            double scale = 1.0;
            for (int k = 0; k < batch[i].effective_n; ++k) scale *= gamma;
            targets[i] += scale * qv.at(static_cast<int>(j), a);
        }
    }
    return targets;
}

std::vector<double> nstep_targets(const std::vector<NStepWindow>& batch, double gamma,
                                  const AgentNets& nets, Rng& rng) {
    return nstep_targets(
        batch, gamma, [&](const std::vector<int>& s) { return nets.q_values(s, true); },
        [&](const std::vector<int>& s) { return nets.policy_probs(s, false); }, rng);
}

Tape::NodeId critic_loss(Tape& t, const AgentNets& nets, const std::vector<int>& states,
                         const std::vector<int>& actions, const std::vector<double>& targets,
                         double delta) {
    if (states.size() != actions.size() || states.size() != targets.size())
        throw std::invalid_argument("critic_loss: batch size mismatch");
    for (double v : targets)
        if (!std::isfinite(v)) throw std::runtime_error("critic_loss: non-finite target");

    Tape::NodeId obs = t.input(one_hot_batch(states, nets.spec.obs_dim));
    Tape::NodeId q = nets.q_head(t, nets.encode(t, obs, false, true), false, true);
    Tape::NodeId qa = t.gather_cols(q, actions);
    Tape::NodeId tgt = t.input(Tensor::col(targets));
    return t.mean_all(t.huber(qa, tgt, delta));
}

PolicyGradEstimate policy_gradient(const Tensor& features, const Tensor& q_ref, const ParamSet& params,
                                   const std::string& head, double beta, PgMode mode, bool use_baseline,
                                   Rng& rng) {
    if (features.rows != q_ref.rows) throw std::invalid_argument("policy_gradient: batch size mismatch");
    if (!q_ref.all_finite()) throw std::runtime_error("policy_gradient: non-finite Q reference");

    const int B = features.rows;
    const int A = q_ref.cols;

    Tape t;
    Tape::NodeId feat = t.input(features);
    Tape::NodeId logits = affine(t, params, head, feat, true);
    Tape::NodeId logp = t.log_softmax_rows(logits);
    const Tensor probs = [&] {
        Tape::NodeId p = t.softmax_rows(logits);
        return t.value(p);
    }();

    // Control variate: expected Q under the current policy, treated as a
    // constant. The old-policy weights in the baseline are a snapshot of the
    // current probabilities with gradient flow stopped.
    std::vector<double> baseline(B, 0.0);
    if (use_baseline) {
        for (int r = 0; r < B; ++r) {
            double b = 0.0;
            for (int a = 0; a < A; ++a) b += probs.at(r, a) * q_ref.at(r, a);
            baseline[r] = b;
        }
    }

    Tape::NodeId surr_main;
    double mean_adv = 0.0;
    if (mode == PgMode::Sampled) {
        std::vector<int> sampled(B);
        Tensor adv(B, 1);
        for (int r = 0; r < B; ++r) {
            sampled[r] = rng.categorical(&probs.data[static_cast<std::size_t>(r) * A], A);
            adv.data[r] = q_ref.at(r, sampled[r]) - baseline[r];
            mean_adv += adv.data[r];
        }
        Tape::NodeId logp_a = t.gather_cols(logp, sampled);
        surr_main = t.mean_all(t.mul(t.input(adv), logp_a));
    } else {
        Tensor weights(B, A);
        for (int r = 0; r < B; ++r)
            for (int a = 0; a < A; ++a) {
                const double w = probs.at(r, a) * (q_ref.at(r, a) - baseline[r]);
                weights.at(r, a) = w;
                mean_adv += w;
            }
        surr_main = t.mean_all(t.rowsum(t.mul(t.input(weights), logp)));
    }
    mean_adv /= B;

    Tape::NodeId ent = softmax_entropy_rows(t, logits);
    Tape::NodeId surr = t.add(surr_main, t.scale(t.mean_all(ent), beta));

    PolicyGradEstimate est;
    est.grad = t.backward(surr);
    double h = 0.0;
    for (double v : t.value(ent).data) h += v;
    h /= B;
    est.entropy = std::min(std::max(h, 0.0), std::log(static_cast<double>(A)));
    est.mean_advantage = mean_adv;
    double bl = 0.0;
    for (double v : baseline) bl += v;
    est.baseline = bl / B;
    return est;
}

int argmax_lowest(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

int select_action(const AgentNets& nets, int state_id, ActionMode mode, Rng& rng) {
    const Tensor probs = nets.policy_probs({state_id}, true);
    if (mode == ActionMode::Greedy) return argmax_lowest(probs.data.data(), probs.cols);
    return rng.categorical(probs.data.data(), probs.cols);
}

} // namespace deskrl

#include "deskrl/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "deskrl/schedule.hpp"
#include "deskrl/spr.hpp"

namespace deskrl {

namespace {

// rng sub-stream salts
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEnvStream = 2;
constexpr std::uint64_t kActStream = 3;
constexpr std::uint64_t kUpdateStream = 4;
constexpr std::uint64_t kEvalStream = 5;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

TabularMDP build_env(const TrainConfig& cfg) {
    TabularMDP mdp;
    if (cfg.env_type == "gridworld") {
        mdp = build_gridworld(cfg.width, cfg.height, cfg.goal_x, cfg.goal_y, cfg.step_reward,
                              cfg.goal_reward, cfg.slip, cfg.env_gamma);
    } else if (cfg.env_type == "chain") {
        mdp = build_chain(cfg.chain_length, cfg.chain_reward, cfg.env_gamma);
    } else if (cfg.env_type == "random") {
        Rng rng(cfg.seed ^ 0x5eedULL);
        mdp = build_random_mdp(cfg.random_states, cfg.random_actions, cfg.env_gamma, rng);
    } else if (cfg.env_type == "file") {
        mdp = load_mdp_file(cfg.env_file);
    } else {
        throw ConfigError("env.type", "unknown environment type " + cfg.env_type);
    }
    mdp.episode_cap = cfg.episode_cap;
    return mdp;
}

namespace {

struct Trainer {
    const TrainConfig& cfg;
    std::string out_dir;
    TabularMDP mdp;
    AgentNets nets;
    OptimState opt;
    ReplayBuffer replay;
    Rng env_rng, act_rng, upd_rng;
    std::ofstream score_log, diag_log;
    std::int64_t env_steps = 0;
    std::int64_t updates = 0;
    std::int64_t updates_since_reset = 0;
    std::int64_t total_updates_planned = 0;
    std::int64_t train_episode = 0;

    Trainer(const TrainConfig& c, const std::string& dir)
        : cfg(c),
          out_dir(dir),
          mdp(build_env(c)),
          nets(make_nets(c, mdp)),
          replay(static_cast<std::size_t>(c.buffer_capacity)),
          env_rng(Rng(c.seed).stream(kEnvStream)),
          act_rng(Rng(c.seed).stream(kActStream)),
          upd_rng(Rng(c.seed).stream(kUpdateStream)) {
        opt.learning_rate = cfg.lr;
        opt.weight_decay = cfg.weight_decay;
        if (!cfg.wd_policy) {
            opt.no_decay.insert("policy/w");
            opt.no_decay.insert("policy/b");
        }
        total_updates_planned = cfg.total_updates();
    }

    static AgentNets make_nets(const TrainConfig& c, const TabularMDP& mdp) {
        Rng init_rng = Rng(c.seed).stream(kInitStream);
        NetSpec spec;
        spec.obs_dim = mdp.n_states;
        spec.n_actions = mdp.n_actions;
        spec.hidden = c.hidden;
        spec.latent = c.latent;
        spec.proj = c.proj;
        return AgentNets::create(spec, init_rng);
    }

    double beta_at(std::int64_t t) const {
        if (cfg.beta_mode == "constant") return cfg.beta0;
        return beta_schedule(cfg.beta0, cfg.resolved_anneal_end(), total_updates_planned,
                             cfg.resolved_freeze(), t);
    }

    void write_score_row(const char* phase, std::int64_t episode, double ret) {
        score_log << cfg.run_id << "," << cfg.seed << "," << phase << "," << episode << "," << fmt(ret)
                  << "\n";
    }

    Checkpoint make_checkpoint() const {
        Checkpoint ck;
        ck.config_echo = cfg.echo();
        ck.nets = nets;
        ck.optim = opt;
        ck.env_steps = env_steps;
        ck.updates = updates;
        ck.updates_since_reset = updates_since_reset;
        return ck;
    }

    void snapshot(const std::string& reason) {
        make_checkpoint().save(out_dir + "/abort_snapshot.ckpt");
        std::ofstream note(out_dir + "/abort_reason.txt");
        note << reason << "\n";
    }

    void do_reset() {
        shrink_and_perturb(nets.online, cfg.keep_encoder, AgentNets::encoder_reset_groups(), upd_rng);
        shrink_and_perturb(nets.online, cfg.keep_heads, AgentNets::head_reset_groups(), upd_rng);
        opt.reset_moments(nets.online.names());
        nets.sync_target_to_online();
        updates_since_reset = 0;
    }

    void do_update() {
        const std::int64_t u = updates_since_reset;
        const double nd = exp_schedule(static_cast<double>(cfg.n_start), static_cast<double>(cfg.n_end), u,
                                       cfg.schedule_horizon);
        const int n = std::max(static_cast<int>(cfg.n_end), static_cast<int>(std::lround(nd)));
        const double gamma_t = exp_schedule(cfg.gamma_start, cfg.gamma_end, u, cfg.schedule_horizon);
        const double beta_t = beta_at(updates);

        const std::vector<NStepWindow> batch = replay.sample_batch(cfg.batch, n, upd_rng);
        const std::vector<double> targets = nstep_targets(batch, gamma_t, nets, upd_rng);

        std::vector<int> states, actions;
        states.reserve(batch.size());
        actions.reserve(batch.size());
        for (const NStepWindow& w : batch) {
            states.push_back(w.states.front());
            actions.push_back(w.actions.front());
        }

        Tape tape;
        Tape::NodeId critic = critic_loss(tape, nets, states, actions, targets, cfg.huber_delta);
        const SprBatch sb = spr_batch_from_windows(batch, cfg.spr_horizon);
        const LatentRollout rollout =
            build_spr_rollout(tape, nets, sb.states_t, sb.actions, sb.future_states, &sb.step_mask);
        Tape::NodeId spr = spr_loss(tape, rollout);
        Tape::NodeId total = tape.add(critic, tape.scale(spr, cfg.spr_weight));

        const double critic_v = tape.value(critic).data[0];
        const double spr_v = tape.value(spr).data[0];
        if (!std::isfinite(critic_v) || !std::isfinite(spr_v)) {
            snapshot("non-finite loss at update " + std::to_string(updates) + " (critic=" + fmt(critic_v) +
                     ", spr=" + fmt(spr_v) + ")");
            throw std::runtime_error("training aborted: non-finite loss");
        }

        GradMap grads = tape.backward(total);

        const Tensor feats = nets.latents(states, false);
        const Tensor q_ref = nets.q_values(states, false);
        const PgMode mode = cfg.pg_mode == "exact" ? PgMode::Exact : PgMode::Sampled;
        PolicyGradEstimate pg =
            policy_gradient(feats, q_ref, nets.online, "policy", beta_t, mode, cfg.use_baseline, upd_rng);

        // ascent on the policy surrogate: subtract its gradient from the loss
        // gradient fed to the optimizer
        for (auto& [name, g] : pg.grad) {
            auto it = grads.find(name);
            if (it == grads.end()) {
                for (double& v : g.data) v = -v;
                grads.emplace(name, std::move(g));
            } else {
                for (int i = 0; i < g.size(); ++i) it->second.data[i] -= g.data[i];
            }
        }

        adamw_step(nets.online, grads, opt);
        ema_update(nets.target, nets.online, cfg.tau);

        updates += 1;
        updates_since_reset += 1;

        if (updates % cfg.diag_every == 0) {
            diag_log << updates << "," << fmt(beta_t) << "," << n << "," << fmt(gamma_t) << ","
                     << fmt(critic_v) << "," << fmt(spr_v) << "," << fmt(pg.entropy) << ","
                     << fmt(pg.baseline) << "," << fmt(pg.mean_advantage) << "," << fmt(grad_norm(grads))
                     << "\n";
        }

        if (cfg.reset_period > 0 && updates % cfg.reset_period == 0 && updates < total_updates_planned)
            do_reset();
    }

    RunArtifacts run() {
        std::filesystem::create_directories(out_dir);
        RunArtifacts art;
        art.out_dir = out_dir;
        art.seed = cfg.seed;
        art.score_log_path = out_dir + "/scores.csv";
        art.diagnostics_path = out_dir + "/diagnostics.csv";
        art.config_echo_path = out_dir + "/config.echo";
        art.checkpoint_path = out_dir + "/final.ckpt";

        {
            std::ofstream echo(art.config_echo_path);
            echo << cfg.echo();
        }
        score_log.open(art.score_log_path);
        diag_log.open(art.diagnostics_path);
        if (!score_log || !diag_log) throw std::runtime_error("run_training: cannot write into " + out_dir);
        score_log << "run_id,seed,phase,episode,return\n";
        diag_log << "update,beta,n,gamma,critic_loss,spr_loss,entropy,baseline,mean_advantage,grad_norm\n";

        EnvState st = env_reset(mdp, env_rng);
        double episode_return = 0.0;
        double update_budget = 0.0;

        for (std::int64_t step = 0; step < cfg.total_env_steps; ++step) {
            const int s_before = st.state_id;
            const int a = select_action(nets, s_before, ActionMode::Sample, act_rng);
            const StepResult sr = env_step(mdp, st, a, env_rng);
            replay.push({s_before, a, sr.reward, sr.next_state, sr.done});
            episode_return += sr.reward;
            env_steps += 1;
            if (sr.done) {
                write_score_row("train", train_episode++, episode_return);
                episode_return = 0.0;
                st = env_reset(mdp, env_rng);
            }
            update_budget += cfg.rr;
            while (update_budget >= 1.0) {
                update_budget -= 1.0;
                do_update();
            }
        }

        Checkpoint ck = make_checkpoint();
        ck.save(art.checkpoint_path);

        Rng eval_rng = Rng(cfg.seed).stream(kEvalStream);
        const ActionMode mode = cfg.eval_mode == "greedy" ? ActionMode::Greedy : ActionMode::Sample;
        art.eval_returns = evaluate(ck, static_cast<int>(cfg.eval_episodes), mode, eval_rng);
        for (std::size_t i = 0; i < art.eval_returns.size(); ++i)
            write_score_row("eval", static_cast<std::int64_t>(i), art.eval_returns[i]);

        art.env_steps = env_steps;
        art.updates = updates;
        score_log.flush();
        diag_log.flush();
        return art;
    }
};

} // namespace

RunArtifacts run_training(const TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    Trainer tr(cfg, out_dir);
    return tr.run();
}

std::vector<double> evaluate(const Checkpoint& ck, int episodes, ActionMode mode, Rng& rng) {
    if (episodes < 0) throw std::invalid_argument("evaluate: episodes must be nonnegative");
    std::vector<double> returns;
    if (episodes == 0) return returns;

    ConfigDoc doc = ConfigDoc::parse(ck.config_echo);
    TrainConfig cfg = TrainConfig::from_doc(doc);
    TabularMDP mdp = build_env(cfg);

    for (int e = 0; e < episodes; ++e) {
        EnvState st = env_reset(mdp, rng);
        double ret = 0.0;
        while (!st.done) {
            const int a = select_action(ck.nets, st.state_id, mode, rng);
            const StepResult sr = env_step(mdp, st, a, rng);
            ret += sr.reward;
        }
        returns.push_back(ret);
    }
    return returns;
}

std::vector<double> evaluate_checkpoint(const std::string& path, int episodes, ActionMode mode,
                                        std::uint64_t seed) {
    Checkpoint ck = Checkpoint::load(path);
    Rng rng = Rng(seed).stream(kEvalStream);
    return evaluate(ck, episodes, mode, rng);
}

} // namespace deskrl

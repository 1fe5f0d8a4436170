#include <doctest.h>

#include <cmath>

#include "deskrl/spr.hpp"
#include "support/oracles.hpp"

using namespace deskrl;

namespace {

AgentNets tiny_nets(Rng& rng, int obs = 5, int actions = 3, int latent = 4, int proj = 3) {
    NetSpec spec;
    spec.obs_dim = obs;
    spec.n_actions = actions;
    spec.hidden = 6;
    spec.latent = latent;
    spec.proj = proj;
    return AgentNets::create(spec, rng);
}

// make the transition model the identity on the latent, ignoring actions
void make_identity_transition(AgentNets& nets) {
    Tensor& w = nets.online.get("transition/w");
    w.fill(0.0);
    for (int i = 0; i < nets.spec.latent; ++i) w.at(i, i) = 1.0;
    nets.online.get("transition/b").fill(0.0);
}

} // namespace

TEST_CASE("rollout: k = 1 is a single application of the model") {
    Rng rng(1);
    AgentNets nets = tiny_nets(rng);
    Tape t;
    Tape::NodeId obs = t.input(one_hot_batch({2}, nets.spec.obs_dim));
    Tape::NodeId z0 = nets.encode(t, obs, false, false);
    auto latents = rollout_latents(t, nets, z0, {{1}});
    REQUIRE(latents.size() == 1);

    // by hand: concat(z0, onehot(1)) * W + b
    const Tensor z = t.value(z0);
    const Tensor& w = nets.online.get("transition/w");
    const Tensor& b = nets.online.get("transition/b");
    for (int c = 0; c < nets.spec.latent; ++c) {
        double acc = b.data[c];
        for (int k = 0; k < nets.spec.latent; ++k) acc += z.data[k] * w.at(k, c);
        acc += w.at(nets.spec.latent + 1, c); // one-hot action 1
        CHECK(t.value(latents[0]).data[c] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("identity-initialized model is a fixed point of the rollout") {
    Rng rng(2);
    AgentNets nets = tiny_nets(rng);
    make_identity_transition(nets);
    Tape t;
    Tape::NodeId obs = t.input(one_hot_batch({1, 3}, nets.spec.obs_dim));
    Tape::NodeId z0 = nets.encode(t, obs, false, false);
    auto latents = rollout_latents(t, nets, z0, {{0, 1}, {2, 0}, {1, 2}});
    const Tensor z = t.value(z0);
    for (const auto& id : latents) CHECK(t.value(id).data == z.data);
}

TEST_CASE("rollout horizon must match the provided future window") {
    Rng rng(3);
    AgentNets nets = tiny_nets(rng);
    Tape t;
    CHECK_THROWS_AS(build_spr_rollout(t, nets, {0}, {{0}, {1}}, {{1}}), std::invalid_argument);
    CHECK_THROWS_AS(build_spr_rollout(t, nets, {0}, {}, {}), std::invalid_argument);
}

TEST_CASE("spr loss endpoint values on crafted rollouts") {
    // bypass the nets: builds a rollout struct directly from node ids
    Tape t;
    LatentRollout r;
    r.horizon = 1;
    r.batch = 1;

    SUBCASE("aligned unit vectors give loss -1") {
        Tensor vx(1, 3), vy(1, 3);
        vx.data = {1.0, 0.0, 0.0};
        vy.data = {0.0, 1.0, 0.0};
        r.online_x = {t.input(vx)};
        r.target_x = {t.input(vx)};
        r.online_y = {t.input(vy)};
        r.target_y = {t.input(vy)};
        Tape::NodeId loss = spr_loss(t, r);
        CHECK(t.value(loss).data[0] == doctest::Approx(-1.0).epsilon(1e-12));
    }

    SUBCASE("orthogonal pairs give loss 0") {
        Tensor a(1, 2), b(1, 2);
        a.data = {1.0, 0.0};
        b.data = {0.0, 1.0};
        r.online_x = {t.input(a)};
        r.target_x = {t.input(b)};
        r.online_y = {t.input(a)};
        r.target_y = {t.input(b)};
        CHECK(t.value(spr_loss(t, r)).data[0] == doctest::Approx(0.0));
    }

    SUBCASE("rescaling one vector leaves the loss unchanged") {
        Tensor a(1, 3), b(1, 3);
        a.data = {0.3, -0.7, 0.2};
        b.data = {0.1, 0.4, -0.9};
        r.online_x = {t.input(a)};
        r.target_x = {t.input(b)};
        r.online_y = {t.input(b)};
        r.target_y = {t.input(a)};
        const double base = t.value(spr_loss(t, r)).data[0];

        Tensor a4 = a, a5 = a;
        for (double& v : a4.data) v *= 4.0; // power of two: bit-exact
        for (double& v : a5.data) v *= 5.0;

        Tape t4;
        LatentRollout r4 = r;
        r4.online_x = {t4.input(a4)};
        r4.target_x = {t4.input(b)};
        r4.online_y = {t4.input(b)};
        r4.target_y = {t4.input(a)};
        CHECK(t4.value(spr_loss(t4, r4)).data[0] == base);

        Tape t5;
        LatentRollout r5 = r;
        r5.online_x = {t5.input(a5)};
        r5.target_x = {t5.input(b)};
        r5.online_y = {t5.input(b)};
        r5.target_y = {t5.input(a)};
        CHECK(t5.value(spr_loss(t5, r5)).data[0] == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("spr loss is bounded in [-1, 1] and tolerates zero vectors") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Tape t;
        LatentRollout r;
        r.horizon = 1 + rng.uniform_int(4);
        r.batch = 1 + rng.uniform_int(3);
        for (int j = 0; j < r.horizon; ++j) {
            auto draw = [&](bool zero) {
                Tensor v(r.batch, 4);
                if (!zero)
                    for (double& x : v.data) x = rng.uniform(-2.0, 2.0);
                return t.input(v);
            };
            const bool zero_row = trial % 7 == 0;
            r.online_x.push_back(draw(zero_row));
            r.target_x.push_back(draw(false));
            r.online_y.push_back(draw(false));
            r.target_y.push_back(draw(false));
        }
        const double v = t.value(spr_loss(t, r)).data[0];
        CHECK(std::isfinite(v));
        CHECK(v >= -1.0 - 1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}

TEST_CASE("full spr loss through the nets: target path carries no gradient") {
    Rng rng(7);
    AgentNets nets = tiny_nets(rng);
    std::vector<int> states = {0, 2};
    std::vector<std::vector<int>> actions = {{0, 1}, {1, 2}};
    std::vector<std::vector<int>> future = {{1, 3}, {2, 4}};

    Tape t;
    LatentRollout r = build_spr_rollout(t, nets, states, actions, future);
    Tape::NodeId loss = spr_loss(t, r);
    const double v1 = t.value(loss).data[0];
    GradMap g = t.backward(loss);

    // gradient exists for online groups only; changing target params moves
    // the value but never produces a gradient entry
    CHECK(g.count("encoder/l0/w") == 1);
    CHECK(g.count("transition/w") == 1);
    CHECK(g.count("proj_q/w") == 1);
    CHECK(g.count("pred_pi/w") == 1);

    nets.target.get("proj_q/w").data[0] += 1.0;
    Tape t2;
    LatentRollout r2 = build_spr_rollout(t2, nets, states, actions, future);
    const double v2 = t2.value(spr_loss(t2, r2)).data[0];
    CHECK(v2 != doctest::Approx(v1));
}

TEST_CASE("gradient through a k = 3 rollout matches finite differences") {
    Rng rng(11);
    AgentNets nets = tiny_nets(rng);
    std::vector<int> states = {1, 4};
    std::vector<std::vector<int>> actions = {{0, 2}, {1, 1}, {2, 0}};
    std::vector<std::vector<int>> future = {{2, 3}, {3, 2}, {4, 1}};

    auto loss_value = [&] {
        Tape t;
        LatentRollout r = build_spr_rollout(t, nets, states, actions, future);
        return t.value(spr_loss(t, r)).data[0];
    };
    Tape t;
    LatentRollout r = build_spr_rollout(t, nets, states, actions, future);
    GradMap g = t.backward(spr_loss(t, r));

    for (const char* name : {"encoder/l0/w", "encoder/l2/b", "transition/w", "proj_pi/w", "pred_q/b"}) {
        const Tensor fd = oracle::fd_gradient(nets.online, name, loss_value);
        const Tensor& an = g[name];
        for (int i = 0; i < fd.size(); ++i) CHECK(oracle::rel_err(an.data[i], fd.data[i]) <= 1e-4);
    }
}

TEST_CASE("masked steps contribute nothing") {
    Rng rng(13);
    AgentNets nets = tiny_nets(rng);

    NStepWindow w1;
    w1.states = {0, 1, 2};
    w1.actions = {0, 1};
    w1.rewards = {0.0, 0.0};
    w1.effective_n = 2;
    NStepWindow w2;
    w2.states = {3, 4};
    w2.actions = {2};
    w2.rewards = {0.0};
    w2.effective_n = 1;
    w2.done = true;

    SprBatch b = spr_batch_from_windows({w1, w2}, 2);
    CHECK(b.step_mask[0].data[0] == 1.0);
    CHECK(b.step_mask[0].data[1] == 1.0);
    CHECK(b.step_mask[1].data[0] == 1.0);
    CHECK(b.step_mask[1].data[1] == 0.0);

    Tape t;
    LatentRollout r = build_spr_rollout(t, nets, b.states_t, b.actions, b.future_states, &b.step_mask);
    const double with_mask = t.value(spr_loss(t, r)).data[0];

    // flipping the placeholder future state of the masked entry changes nothing
    b.future_states[1][1] = 0;
    Tape t2;
    LatentRollout r2 = build_spr_rollout(t2, nets, b.states_t, b.actions, b.future_states, &b.step_mask);
    CHECK(t2.value(spr_loss(t2, r2)).data[0] == with_mask);
}

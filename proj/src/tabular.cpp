#include "deskrl/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace deskrl {

void Policy::validate() const {
    if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument("policy: wrong size");
    for (int s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            const double v = prob(s, a);
            if (v < 0.0) throw std::invalid_argument("policy: negative probability in row " + std::to_string(s));
            sum += v;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("policy: row " + std::to_string(s) + " sums to " + std::to_string(sum));
    }
}

Policy uniform_policy(const TabularMDP& mdp) {
    Policy pi;
    pi.n_states = mdp.n_states;
    pi.n_actions = mdp.n_actions;
    pi.probs.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 1.0 / mdp.n_actions);
    return pi;
}

Policy random_policy(const TabularMDP& mdp, Rng& rng) {
    Policy pi;
    pi.n_states = mdp.n_states;
    pi.n_actions = mdp.n_actions;
    pi.probs.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        double sum = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double v = -std::log(1.0 - rng.uniform());
            pi.prob_ref(s, a) = v;
            sum += v;
        }
        for (int a = 0; a < mdp.n_actions; ++a) pi.prob_ref(s, a) /= sum;
    }
    return pi;
}

QTable bellman_backup(const TabularMDP& mdp, const Policy& pi, const QTable& q) {
    const int S = mdp.n_states;
    const int A = mdp.n_actions;
    // V_pi(s') = sum_a' pi(a'|s') q(s', a')
    std::vector<double> v(S, 0.0);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) v[s] += pi.prob(s, a) * q.at(s, a);

    QTable out;
    out.n_states = S;
    out.n_actions = A;
    out.q.assign(static_cast<std::size_t>(S) * A, 0.0);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double exp_v = 0.0;
            const double* row = &mdp.transition[(static_cast<std::size_t>(s) * A + a) * S];
            for (int s2 = 0; s2 < S; ++s2) exp_v += row[s2] * v[s2];
            out.at_ref(s, a) = mdp.r(s, a) + mdp.gamma * exp_v;
        }
    }
    return out;
}

namespace {

int evaluation_iteration_cap(const TabularMDP& mdp, double tol) {
    const double range = std::max(mdp.r_max - mdp.r_min, 1e-300);
    const double bound = std::log(tol * (1.0 - mdp.gamma) / range) / std::log(mdp.gamma);
    // generous guard on top of the contraction bound
    return static_cast<int>(std::ceil(std::max(bound, 1.0))) + 64;
}

} // namespace

QTable policy_evaluation(const TabularMDP& mdp, const Policy& pi, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("policy_evaluation: tol must be positive");
    pi.validate();

    QTable q;
    q.n_states = mdp.n_states;
    q.n_actions = mdp.n_actions;
    q.q.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, mdp.r_min / (1.0 - mdp.gamma));

    const int cap = evaluation_iteration_cap(mdp, tol);
    for (int it = 0; it < cap; ++it) {
        QTable next = bellman_backup(mdp, pi, q);
        const double diff = max_abs_diff(next, q);
        q = std::move(next);
        if (diff <= tol) return q;
    }
    throw std::runtime_error("policy_evaluation: did not converge (invalid MDP?)");
}

Policy policy_improvement(const TabularMDP& mdp, const QTable& q) {
    for (double v : q.q)
        if (!std::isfinite(v)) throw std::invalid_argument("policy_improvement: non-finite Q value");
    Policy pi;
    pi.n_states = mdp.n_states;
    pi.n_actions = mdp.n_actions;
    pi.probs.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0);
    for (int s = 0; s < mdp.n_states; ++s) {
        int best = 0;
        for (int a = 1; a < mdp.n_actions; ++a)
            if (q.at(s, a) > q.at(s, best)) best = a;
        pi.prob_ref(s, best) = 1.0;
    }
    return pi;
}

PolicyIterationResult policy_iteration(const TabularMDP& mdp, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("policy_iteration: tol must be positive");

    PolicyIterationResult res;
    res.policy = uniform_policy(mdp);
    const int max_rounds = mdp.n_states * mdp.n_actions + 10;
    for (int round = 0; round < max_rounds; ++round) {
        res.q = policy_evaluation(mdp, res.policy, tol);
        Policy improved = policy_improvement(mdp, res.q);
        res.improvement_rounds = round + 1;
        const bool stable = improved.probs == res.policy.probs;
        res.policy = std::move(improved);
        if (stable) return res;
    }
    throw std::runtime_error("policy_iteration: improvement-round budget exceeded");
}

QTable value_iteration(const TabularMDP& mdp, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const int S = mdp.n_states;
    const int A = mdp.n_actions;

    QTable q;
    q.n_states = S;
    q.n_actions = A;
    q.q.assign(static_cast<std::size_t>(S) * A, mdp.r_min / (1.0 - mdp.gamma));

    const int cap = evaluation_iteration_cap(mdp, tol);
    std::vector<double> v(S, 0.0);
    for (int it = 0; it < cap; ++it) {
        for (int s = 0; s < S; ++s) {
            double best = q.at(s, 0);
            for (int a = 1; a < A; ++a) best = std::max(best, q.at(s, a));
            v[s] = best;
        }
        double diff = 0.0;
        QTable next = q;
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                double exp_v = 0.0;
                const double* row = &mdp.transition[(static_cast<std::size_t>(s) * A + a) * S];
                for (int s2 = 0; s2 < S; ++s2) exp_v += row[s2] * v[s2];
                const double nv = mdp.r(s, a) + mdp.gamma * exp_v;
                diff = std::max(diff, std::fabs(nv - next.at(s, a)));
                next.at_ref(s, a) = nv;
            }
        }
        q = std::move(next);
        if (diff <= tol) return q;
    }
    throw std::runtime_error("value_iteration: did not converge (invalid MDP?)");
}

double max_abs_diff(const QTable& a, const QTable& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.q.size(); ++i) m = std::max(m, std::fabs(a.q[i] - b.q[i]));
    return m;
}

double deterministic_policy_return(const TabularMDP& mdp, const Policy& pi) {
    double total = 0.0;
    for (int s0 = 0; s0 < mdp.n_states; ++s0) {
        const double w = mdp.initial_dist[s0];
        if (w == 0.0) continue;
        int s = s0;
        double ret = 0.0;
        for (int step = 0; step < mdp.episode_cap && !mdp.is_terminal(s); ++step) {
            int a = 0;
            for (int c = 1; c < mdp.n_actions; ++c)
                if (pi.prob(s, c) > pi.prob(s, a)) a = c;
            ret += mdp.r(s, a);
            int next = -1;
            for (int s2 = 0; s2 < mdp.n_states; ++s2) {
                if (mdp.p(s, a, s2) == 1.0) {
                    next = s2;
                    break;
                }
            }
            if (next < 0)
                throw std::invalid_argument("deterministic_policy_return: transitions are stochastic");
            s = next;
        }
        total += w * ret;
    }
    return total;
}

void save_policy_q(const Policy& pi, const QTable& q, std::ostream& out) {
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    out << "deskrl-policy-q 1\n";
    out << "states " << pi.n_states << "\n";
    out << "actions " << pi.n_actions << "\n";
    out << "policy\n";
    for (int s = 0; s < pi.n_states; ++s) {
        for (int a = 0; a < pi.n_actions; ++a) {
            if (a) out << " ";
            put(pi.prob(s, a));
        }
        out << "\n";
    }
    out << "q\n";
    for (int s = 0; s < q.n_states; ++s) {
        for (int a = 0; a < q.n_actions; ++a) {
            if (a) out << " ";
            put(q.at(s, a));
        }
        out << "\n";
    }
}

void load_policy_q(std::istream& in, Policy& pi, QTable& q) {
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(in, line)) throw std::runtime_error(std::string("policy-q load: missing ") + what);
        return line;
    };
    if (next("header") != "deskrl-policy-q 1") throw std::runtime_error("policy-q load: bad header");
    int S = 0, A = 0;
    {
        std::istringstream ss(next("states"));
        std::string k;
        ss >> k >> S;
        if (k != "states") throw std::runtime_error("policy-q load: expected states");
    }
    {
        std::istringstream ss(next("actions"));
        std::string k;
        ss >> k >> A;
        if (k != "actions") throw std::runtime_error("policy-q load: expected actions");
    }
    if (next("policy") != "policy") throw std::runtime_error("policy-q load: expected policy");
    pi.n_states = S;
    pi.n_actions = A;
    pi.probs.clear();
    for (int s = 0; s < S; ++s) {
        std::istringstream ss(next("policy row"));
        double v;
        while (ss >> v) pi.probs.push_back(v);
    }
    if (next("q") != "q") throw std::runtime_error("policy-q load: expected q");
    q.n_states = S;
    q.n_actions = A;
    q.q.clear();
    for (int s = 0; s < S; ++s) {
        std::istringstream ss(next("q row"));
        double v;
        while (ss >> v) q.q.push_back(v);
    }
    pi.validate();
    if (q.q.size() != static_cast<std::size_t>(S) * A) throw std::runtime_error("policy-q load: bad q size");
}

} // namespace deskrl

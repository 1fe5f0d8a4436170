#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "deskrl/mdp.hpp"

namespace deskrl {

/// Stochastic policy: rows are per-state distributions over actions.
struct Policy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs; // (s, a)

    double prob(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    double& prob_ref(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }

    /// Rows must be nonnegative and sum to 1 within 1e-12.
    void validate() const;
};

struct QTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> q; // (s, a)

    double at(int s, int a) const { return q[static_cast<std::size_t>(s) * n_actions + a]; }
    double& at_ref(int s, int a) { return q[static_cast<std::size_t>(s) * n_actions + a]; }
};

Policy uniform_policy(const TabularMDP& mdp);
Policy random_policy(const TabularMDP& mdp, Rng& rng);

/// One application of the on-policy Bellman backup operator.
QTable bellman_backup(const TabularMDP& mdp, const Policy& pi, const QTable& q);

/// Iterates the backup operator until the sup-norm difference of successive
/// iterates is at most tol; the returned table's Bellman residual is then
/// below tol as well.
QTable policy_evaluation(const TabularMDP& mdp, const Policy& pi, double tol);

/// Deterministic greedy policy; ties broken toward the lowest action index.
Policy policy_improvement(const TabularMDP& mdp, const QTable& q);

struct PolicyIterationResult {
    Policy policy;
    QTable q;
    int improvement_rounds = 0;
};

/// Alternates evaluation and greedy improvement until the greedy policy is
/// stable. Throws std::runtime_error if n_states*n_actions + 10 rounds do
/// not suffice (unreachable on valid inputs).
PolicyIterationResult policy_iteration(const TabularMDP& mdp, double tol);

/// Sup-norm fixed point of the Bellman optimality operator, same stopping
/// rule as policy_evaluation.
QTable value_iteration(const TabularMDP& mdp, double tol);

double max_abs_diff(const QTable& a, const QTable& b);

/// Expected undiscounted episode return of a policy, by exact enumeration of
/// rollouts from the initial distribution (deterministic transitions only).
double deterministic_policy_return(const TabularMDP& mdp, const Policy& pi);

void save_policy_q(const Policy& pi, const QTable& q, std::ostream& out);
void load_policy_q(std::istream& in, Policy& pi, QTable& q);

} // namespace deskrl

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "deskrl/params.hpp"
#include "deskrl/tape.hpp"

namespace deskrl {

struct OptimState {
    double learning_rate = 3e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step_count = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
    std::set<std::string> no_decay; // tensors exempt from weight decay

    /// Drops accumulated moments for the given tensors (used at resets).
    void reset_moments(const std::vector<std::string>& names);
};

/// AdamW step with decoupled decay: the lr*wd*param shrinkage is applied
/// independently of the moment-based update. Missing gradient entries are
/// treated as zero. A non-finite gradient aborts the whole step, leaving
/// params and optimizer state untouched.
void adamw_step(ParamSet& params, const GradMap& grads, OptimState& opt);

/// target' = tau*target + (1-tau)*online, elementwise, for every tensor in
/// `target` (online must carry a same-shaped tensor of the same name).
void ema_update(ParamSet& target, const ParamSet& online, double tau);

/// new = keep*old + (1-keep)*fresh_init for tensors in the given groups;
/// everything else untouched. Fresh draws use each tensor's declared
/// initializer.
void shrink_and_perturb(ParamSet& params, double keep, const std::vector<std::string>& groups, Rng& rng);

double grad_norm(const GradMap& grads);

} // namespace deskrl

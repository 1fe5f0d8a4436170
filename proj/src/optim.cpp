#include "deskrl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace deskrl {

void OptimState::reset_moments(const std::vector<std::string>& names) {
    for (const std::string& n : names) {
        auto it = first_moment.find(n);
        if (it != first_moment.end()) it->second.fill(0.0);
        it = second_moment.find(n);
        if (it != second_moment.end()) it->second.fill(0.0);
    }
}

void adamw_step(ParamSet& params, const GradMap& grads, OptimState& opt) {
    for (const auto& [name, g] : grads) {
        if (!params.has(name)) throw std::invalid_argument("adamw: gradient for unknown tensor " + name);
        if (!params.get(name).same_shape(g))
            throw std::invalid_argument("adamw: gradient shape mismatch for " + name);
        if (!g.all_finite()) throw std::runtime_error("adamw: non-finite gradient for " + name);
    }

    opt.step_count += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step_count));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step_count));

    for (const std::string& name : params.names()) {
        Tensor& p = params.get(name);
        auto git = grads.find(name);
        const double wd = opt.no_decay.count(name) ? 0.0 : opt.weight_decay;

        Tensor& m = opt.first_moment.try_emplace(name, Tensor::zeros(p.rows, p.cols)).first->second;
        Tensor& v = opt.second_moment.try_emplace(name, Tensor::zeros(p.rows, p.cols)).first->second;

        for (int i = 0; i < p.size(); ++i) {
            const double g = git != grads.end() ? git->second.data[i] : 0.0;
            m.data[i] = opt.beta1 * m.data[i] + (1.0 - opt.beta1) * g;
            v.data[i] = opt.beta2 * v.data[i] + (1.0 - opt.beta2) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            const double decay = opt.learning_rate * wd * p.data[i];
            p.data[i] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon) + decay;
        }
    }
    params.bump_version();
}

void ema_update(ParamSet& target, const ParamSet& online, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("ema: tau must lie in [0, 1]");
    for (const std::string& name : target.names()) {
        Tensor& t = target.get(name);
        const Tensor& o = online.get(name);
        if (!t.same_shape(o)) throw std::invalid_argument("ema: shape mismatch for " + name);
        for (int i = 0; i < t.size(); ++i) t.data[i] = tau * t.data[i] + (1.0 - tau) * o.data[i];
    }
    target.bump_version();
}

void shrink_and_perturb(ParamSet& params, double keep, const std::vector<std::string>& groups, Rng& rng) {
    if (!(keep >= 0.0 && keep <= 1.0)) throw std::invalid_argument("shrink_and_perturb: keep must lie in [0, 1]");
    const std::vector<std::string> names = params.group_names(groups);
    for (const std::string& name : names) {
        Tensor& p = params.get(name);
        Tensor fresh(p.rows, p.cols);
        apply_init(fresh, params.init_of(name), rng);
        for (int i = 0; i < p.size(); ++i) p.data[i] = keep * p.data[i] + (1.0 - keep) * fresh.data[i];
    }
    params.bump_version();
}

double grad_norm(const GradMap& grads) {
    double s = 0.0;
    for (const auto& [name, g] : grads)
        for (double v : g.data) s += v * v;
    return std::sqrt(s);
}

} // namespace deskrl

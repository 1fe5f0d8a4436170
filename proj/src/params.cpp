#include "deskrl/params.hpp"

#include <cmath>
#include <stdexcept>

namespace deskrl {

void apply_init(Tensor& t, const TensorInit& init, Rng& rng) {
    switch (init.kind) {
        case TensorInit::Kind::Zeros:
            t.fill(0.0);
            break;
        case TensorInit::Kind::FanInUniform: {
            const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(init.fan_in, 1)));
            for (double& v : t.data) v = rng.uniform(-bound, bound);
            break;
        }
    }
}

void ParamSet::define(const std::string& name, int rows, int cols, TensorInit init, Rng& rng) {
    if (tensors_.count(name)) throw std::invalid_argument("params: duplicate tensor name " + name);
    Tensor t(rows, cols);
    apply_init(t, init, rng);
    names_.push_back(name);
    tensors_[name] = std::move(t);
    inits_[name] = init;
}

Tensor& ParamSet::get(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::invalid_argument("params: unknown tensor " + name);
    return it->second;
}

const Tensor& ParamSet::get(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw std::invalid_argument("params: unknown tensor " + name);
    return it->second;
}

const TensorInit& ParamSet::init_of(const std::string& name) const {
    auto it = inits_.find(name);
    if (it == inits_.end()) throw std::invalid_argument("params: unknown tensor " + name);
    return it->second;
}

bool ParamSet::all_finite() const {
    for (const auto& [name, t] : tensors_)
        if (!t.all_finite()) return false;
    return true;
}

std::vector<std::string> ParamSet::group_names(const std::vector<std::string>& groups) const {
    std::vector<std::string> out;
    for (const std::string& g : groups) {
        bool matched = false;
        const std::string prefix = g + "/";
        for (const std::string& name : names_) {
            if (name.rfind(prefix, 0) == 0 || name == g) {
                out.push_back(name);
                matched = true;
            }
        }
        if (!matched) throw std::invalid_argument("params: unknown group " + g);
    }
    return out;
}

} // namespace deskrl

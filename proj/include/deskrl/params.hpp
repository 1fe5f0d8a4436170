#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deskrl/rng.hpp"
#include "deskrl/tensor.hpp"

namespace deskrl {

/// How a tensor is (re-)initialized; fan-in scaled uniform for affine
/// weights and biases, zeros for anything that should start silent.
struct TensorInit {
    enum class Kind { FanInUniform, Zeros };
    Kind kind = Kind::Zeros;
    int fan_in = 1;
};

void apply_init(Tensor& t, const TensorInit& init, Rng& rng);

/// Flat named parameter store. Names are grouped by slash-separated
/// prefixes ("encoder/w0", "policy/b", ...). Iteration order is the
/// definition order, which keeps updates deterministic.
class ParamSet {
  public:
    void define(const std::string& name, int rows, int cols, TensorInit init, Rng& rng);

    bool has(const std::string& name) const { return tensors_.count(name) != 0; }
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    const TensorInit& init_of(const std::string& name) const;

    const std::vector<std::string>& names() const { return names_; }
    std::uint64_t version() const { return version_; }
    void bump_version() { ++version_; }

    bool all_finite() const;

    /// Names matching any of the given slash-prefix groups. Throws if a
    /// group matches nothing.
    std::vector<std::string> group_names(const std::vector<std::string>& groups) const;

  private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> tensors_;
    std::map<std::string, TensorInit> inits_;
    std::uint64_t version_ = 0;
};

} // namespace deskrl

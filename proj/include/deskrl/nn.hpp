#pragma once

#include <string>

#include "deskrl/params.hpp"
#include "deskrl/tape.hpp"

namespace deskrl {

/// Registers weight (in x out) and bias (1 x out) tensors for an affine
/// layer under `prefix`, fan-in scaled uniform init for both.
inline void add_affine(ParamSet& ps, const std::string& prefix, int in, int out, Rng& rng) {
    ps.define(prefix + "/w", in, out, {TensorInit::Kind::FanInUniform, in}, rng);
    ps.define(prefix + "/b", 1, out, {TensorInit::Kind::FanInUniform, in}, rng);
}

/// x * W + b. When trainable is false the parameters enter the tape as
/// constants and receive no gradient.
inline Tape::NodeId affine(Tape& t, const ParamSet& ps, const std::string& prefix, Tape::NodeId x,
                           bool trainable) {
    const Tensor& w = ps.get(prefix + "/w");
    const Tensor& b = ps.get(prefix + "/b");
    Tape::NodeId wn = trainable ? t.param(prefix + "/w", w) : t.input(w);
    Tape::NodeId bn = trainable ? t.param(prefix + "/b", b) : t.input(b);
    return t.add_rowvec(t.matmul(x, wn), bn);
}

/// Per-row entropy of softmax(logits): -sum_a p * log p, a Bx1 node. The
/// gradient is the exact closed-form entropy gradient.
inline Tape::NodeId softmax_entropy_rows(Tape& t, Tape::NodeId logits) {
    Tape::NodeId logp = t.log_softmax_rows(logits);
    Tape::NodeId p = t.softmax_rows(logits);
    return t.neg(t.rowsum(t.mul(p, logp)));
}

/// One-hot row encoding.
inline Tensor one_hot(int index, int dim) {
    Tensor t(1, dim);
    t.data[index] = 1.0;
    return t;
}

/// Batch of one-hot rows.
inline Tensor one_hot_batch(const std::vector<int>& indices, int dim) {
    Tensor t(static_cast<int>(indices.size()), dim);
    for (int r = 0; r < t.rows; ++r) t.at(r, indices[r]) = 1.0;
    return t;
}

} // namespace deskrl

#pragma once

#include <map>
#include <string>
#include <vector>

#include "deskrl/tensor.hpp"

namespace deskrl {

using GradMap = std::map<std::string, Tensor>;

/// Define-by-run reverse-mode tape. Nodes are created in topological order;
/// backward walks them once in reverse. Shape errors are raised at node
/// construction, never during backward.
class Tape {
  public:
    using NodeId = int;

    /// Constant leaf; no gradient flows into it.
    NodeId input(Tensor v);
    /// Trainable leaf; backward() accumulates its gradient under `name`.
    /// Repeated calls with the same name return the same node.
    NodeId param(const std::string& name, const Tensor& v);

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    /// x (BxN) + broadcast row vector (1xN).
    NodeId add_rowvec(NodeId x, NodeId bias);
    NodeId scale(NodeId x, double c);
    NodeId neg(NodeId x);
    NodeId relu(NodeId x);
    NodeId logt(NodeId x);
    NodeId square(NodeId x);
    NodeId softmax_rows(NodeId x);
    NodeId log_softmax_rows(NodeId x);
    /// out[b] = x[b, idx[b]]; output is Bx1.
    NodeId gather_cols(NodeId x, const std::vector<int>& idx);
    NodeId rowsum(NodeId x); // BxN -> Bx1
    NodeId sum_all(NodeId x);
    NodeId mean_all(NodeId x);
    /// Elementwise Huber loss between same-shaped tensors.
    NodeId huber(NodeId pred, NodeId target, double delta);
    /// Row-wise cosine similarity, norms clamped below at eps. Bx1 output.
    NodeId cosine_rows(NodeId a, NodeId b, double eps = 1e-8);
    NodeId concat_cols(NodeId a, NodeId b);
    /// Identity value, gradient barrier.
    NodeId detach(NodeId x);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    int node_count() const { return static_cast<int>(nodes_.size()); }

    /// Reverse pass from a scalar output; returns gradients keyed by
    /// parameter name. Gradients of unreached parameters are zero tensors.
    GradMap backward(NodeId output);

  private:
    enum class Op {
        Input,
        Param,
        MatMul,
        Add,
        Sub,
        Mul,
        AddRowVec,
        Scale,
        Relu,
        Log,
        Square,
        Softmax,
        LogSoftmax,
        GatherCols,
        RowSum,
        SumAll,
        MeanAll,
        Huber,
        CosineRows,
        ConcatCols,
        Detach,
    };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        Tensor value;
        Tensor grad;
        bool grad_alloc = false;
        std::string name;     // Param only
        std::vector<int> idx; // GatherCols only
        double c0 = 0.0;      // Scale factor / Huber delta / cosine eps
    };

    NodeId push(Node n);
    Tensor& grad_of(NodeId id);
    void check(NodeId id) const;

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> param_nodes_;
};

} // namespace deskrl

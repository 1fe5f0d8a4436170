#include "deskrl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace deskrl {

Tape::NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) throw std::invalid_argument("tape: bad node id");
}

Tensor& Tape::grad_of(NodeId id) {
    Node& n = nodes_[id];
    if (!n.grad_alloc) {
        n.grad = Tensor::zeros(n.value.rows, n.value.cols);
        n.grad_alloc = true;
    }
    return n.grad;
}

Tape::NodeId Tape::input(Tensor v) {
    Node n;
    n.op = Op::Input;
    n.value = std::move(v);
    return push(std::move(n));
}

Tape::NodeId Tape::param(const std::string& name, const Tensor& v) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return it->second;
    Node n;
    n.op = Op::Param;
    n.name = name;
    n.value = v;
    NodeId id = push(std::move(n));
    param_nodes_[name] = id;
    return id;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    check(a);
    check(b);
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.cols != bv.rows)
        throw std::invalid_argument("tape matmul: shapes " + shape_str(av) + " * " + shape_str(bv));
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.value = deskrl::matmul(av, bv);
    return push(std::move(n));
}

namespace {
void require_same_shape(const Tensor& x, const Tensor& y, const char* op) {
    if (!x.same_shape(y))
        throw std::invalid_argument(std::string("tape ") + op + ": shapes " + shape_str(x) + " vs " + shape_str(y));
}
} // namespace

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    check(a);
    check(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "add");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    for (int i = 0; i < n.value.size(); ++i) n.value.data[i] += nodes_[b].value.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    check(a);
    check(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    for (int i = 0; i < n.value.size(); ++i) n.value.data[i] -= nodes_[b].value.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    check(a);
    check(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = nodes_[a].value;
    for (int i = 0; i < n.value.size(); ++i) n.value.data[i] *= nodes_[b].value.data[i];
    return push(std::move(n));
}

Tape::NodeId Tape::add_rowvec(NodeId x, NodeId bias) {
    check(x);
    check(bias);
    const Tensor& xv = nodes_[x].value;
    const Tensor& bv = nodes_[bias].value;
    if (bv.rows != 1 || bv.cols != xv.cols)
        throw std::invalid_argument("tape add_rowvec: shapes " + shape_str(xv) + " + " + shape_str(bv));
    Node n;
    n.op = Op::AddRowVec;
    n.a = x;
    n.b = bias;
    n.value = xv;
    for (int r = 0; r < xv.rows; ++r)
        for (int c = 0; c < xv.cols; ++c) n.value.at(r, c) += bv.data[c];
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId x, double c) {
    check(x);
    Node n;
    n.op = Op::Scale;
    n.a = x;
    n.c0 = c;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v *= c;
    return push(std::move(n));
}

Tape::NodeId Tape::neg(NodeId x) { return scale(x, -1.0); }

Tape::NodeId Tape::relu(NodeId x) {
    check(x);
    Node n;
    n.op = Op::Relu;
    n.a = x;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v = std::max(v, 0.0);
    return push(std::move(n));
}

Tape::NodeId Tape::logt(NodeId x) {
    check(x);
    Node n;
    n.op = Op::Log;
    n.a = x;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v = std::log(v);
    return push(std::move(n));
}

Tape::NodeId Tape::square(NodeId x) {
    check(x);
    Node n;
    n.op = Op::Square;
    n.a = x;
    n.value = nodes_[x].value;
    for (double& v : n.value.data) v *= v;
    return push(std::move(n));
}

Tape::NodeId Tape::softmax_rows(NodeId x) {
    check(x);
    Node n;
    n.op = Op::Softmax;
    n.a = x;
    n.value = nodes_[x].value;
    Tensor& v = n.value;
    for (int r = 0; r < v.rows; ++r) {
        double mx = v.at(r, 0);
        for (int c = 1; c < v.cols; ++c) mx = std::max(mx, v.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < v.cols; ++c) {
            v.at(r, c) = std::exp(v.at(r, c) - mx);
            sum += v.at(r, c);
        }
        for (int c = 0; c < v.cols; ++c) v.at(r, c) /= sum;
    }
    return push(std::move(n));
}

Tape::NodeId Tape::log_softmax_rows(NodeId x) {
    check(x);
    Node n;
    n.op = Op::LogSoftmax;
    n.a = x;
    n.value = nodes_[x].value;
    Tensor& v = n.value;
    for (int r = 0; r < v.rows; ++r) {
        double mx = v.at(r, 0);
        for (int c = 1; c < v.cols; ++c) mx = std::max(mx, v.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < v.cols; ++c) sum += std::exp(v.at(r, c) - mx);
        const double lse = mx + std::log(sum);
        for (int c = 0; c < v.cols; ++c) v.at(r, c) -= lse;
    }
    return push(std::move(n));
}

Tape::NodeId Tape::gather_cols(NodeId x, const std::vector<int>& idx) {
    check(x);
    const Tensor& xv = nodes_[x].value;
    if (static_cast<int>(idx.size()) != xv.rows)
        throw std::invalid_argument("tape gather_cols: index count != rows");
    for (int i : idx)
        if (i < 0 || i >= xv.cols) throw std::invalid_argument("tape gather_cols: index out of range");
    Node n;
    n.op = Op::GatherCols;
    n.a = x;
    n.idx = idx;
    n.value = Tensor(xv.rows, 1);
    for (int r = 0; r < xv.rows; ++r) n.value.data[r] = xv.at(r, idx[r]);
    return push(std::move(n));
}

Tape::NodeId Tape::rowsum(NodeId x) {
    check(x);
    const Tensor& xv = nodes_[x].value;
    Node n;
    n.op = Op::RowSum;
    n.a = x;
    n.value = Tensor(xv.rows, 1);
    for (int r = 0; r < xv.rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < xv.cols; ++c) s += xv.at(r, c);
        n.value.data[r] = s;
    }
    return push(std::move(n));
}

Tape::NodeId Tape::sum_all(NodeId x) {
    check(x);
    Node n;
    n.op = Op::SumAll;
    n.a = x;
    n.value = Tensor(1, 1);
    double s = 0.0;
    for (double v : nodes_[x].value.data) s += v;
    n.value.data[0] = s;
    return push(std::move(n));
}

Tape::NodeId Tape::mean_all(NodeId x) {
    check(x);
    Node n;
    n.op = Op::MeanAll;
    n.a = x;
    n.value = Tensor(1, 1);
    double s = 0.0;
    for (double v : nodes_[x].value.data) s += v;
    n.value.data[0] = nodes_[x].value.size() > 0 ? s / nodes_[x].value.size() : 0.0;
    return push(std::move(n));
}

Tape::NodeId Tape::huber(NodeId pred, NodeId target, double delta) {
    check(pred);
    check(target);
    require_same_shape(nodes_[pred].value, nodes_[target].value, "huber");
    if (!(delta > 0.0)) throw std::invalid_argument("tape huber: delta must be positive");
    Node n;
    n.op = Op::Huber;
    n.a = pred;
    n.b = target;
    n.c0 = delta;
    n.value = nodes_[pred].value;
    const Tensor& tv = nodes_[target].value;
    for (int i = 0; i < n.value.size(); ++i) {
        const double r = n.value.data[i] - tv.data[i];
        const double ar = std::fabs(r);
        n.value.data[i] = ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
    }
    return push(std::move(n));
}

Tape::NodeId Tape::cosine_rows(NodeId a, NodeId b, double eps) {
    check(a);
    check(b);
    require_same_shape(nodes_[a].value, nodes_[b].value, "cosine_rows");
    Node n;
    n.op = Op::CosineRows;
    n.a = a;
    n.b = b;
    n.c0 = eps;
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    n.value = Tensor(av.rows, 1);
    for (int r = 0; r < av.rows; ++r) {
        double na = 0.0, nb = 0.0, dot = 0.0;
        for (int c = 0; c < av.cols; ++c) {
            na += av.at(r, c) * av.at(r, c);
            nb += bv.at(r, c) * bv.at(r, c);
            dot += av.at(r, c) * bv.at(r, c);
        }
        na = std::max(std::sqrt(na), eps);
        nb = std::max(std::sqrt(nb), eps);
        n.value.data[r] = dot / (na * nb);
    }
    return push(std::move(n));
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
    check(a);
    check(b);
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.rows != bv.rows)
        throw std::invalid_argument("tape concat_cols: shapes " + shape_str(av) + " | " + shape_str(bv));
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.value = Tensor(av.rows, av.cols + bv.cols);
    for (int r = 0; r < av.rows; ++r) {
        for (int c = 0; c < av.cols; ++c) n.value.at(r, c) = av.at(r, c);
        for (int c = 0; c < bv.cols; ++c) n.value.at(r, av.cols + c) = bv.at(r, c);
    }
    return push(std::move(n));
}

Tape::NodeId Tape::detach(NodeId x) {
    check(x);
    Node n;
    n.op = Op::Detach;
    n.a = x;
    n.value = nodes_[x].value;
    return push(std::move(n));
}

GradMap Tape::backward(NodeId output) {
    check(output);
    if (nodes_[output].value.size() != 1) throw std::invalid_argument("tape backward: output must be scalar");

    grad_of(output).data[0] = 1.0;

    for (NodeId id = output; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.grad_alloc) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Input:
            case Op::Param:
                break;
            case Op::Detach:
                break; // gradient barrier
            case Op::MatMul: {
                const Tensor& av = nodes_[n.a].value;
                const Tensor& bv = nodes_[n.b].value;
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                // ga += g * b^T
                for (int i = 0; i < av.rows; ++i)
                    for (int j = 0; j < bv.cols; ++j) {
                        const double gij = g.at(i, j);
                        if (gij == 0.0) continue;
                        for (int k = 0; k < av.cols; ++k) ga.at(i, k) += gij * bv.at(k, j);
                    }
                // gb += a^T * g
                for (int i = 0; i < av.rows; ++i)
                    for (int k = 0; k < av.cols; ++k) {
                        const double aik = av.at(i, k);
                        if (aik == 0.0) continue;
                        for (int j = 0; j < bv.cols; ++j) gb.at(k, j) += aik * g.at(i, j);
                    }
                break;
            }
            case Op::Add: {
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (int i = 0; i < g.size(); ++i) {
                    ga.data[i] += g.data[i];
                    gb.data[i] += g.data[i];
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (int i = 0; i < g.size(); ++i) {
                    ga.data[i] += g.data[i];
                    gb.data[i] -= g.data[i];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& av = nodes_[n.a].value;
                const Tensor& bv = nodes_[n.b].value;
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (int i = 0; i < g.size(); ++i) {
                    ga.data[i] += g.data[i] * bv.data[i];
                    gb.data[i] += g.data[i] * av.data[i];
                }
                break;
            }
            case Op::AddRowVec: {
                Tensor& gx = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (int r = 0; r < g.rows; ++r)
                    for (int c = 0; c < g.cols; ++c) {
                        gx.at(r, c) += g.at(r, c);
                        gb.data[c] += g.at(r, c);
                    }
                break;
            }
            case Op::Scale: {
                Tensor& ga = grad_of(n.a);
                for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * n.c0;
                break;
            }
            case Op::Relu: {
                const Tensor& xv = nodes_[n.a].value;
                Tensor& ga = grad_of(n.a);
                for (int i = 0; i < g.size(); ++i)
                    if (xv.data[i] > 0.0) ga.data[i] += g.data[i];
                break;
            }
            case Op::Log: {
                const Tensor& xv = nodes_[n.a].value;
                Tensor& ga = grad_of(n.a);
                for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] / xv.data[i];
                break;
            }
            case Op::Square: {
                const Tensor& xv = nodes_[n.a].value;
                Tensor& ga = grad_of(n.a);
                for (int i = 0; i < g.size(); ++i) ga.data[i] += 2.0 * xv.data[i] * g.data[i];
                break;
            }
            case Op::Softmax: {
                const Tensor& y = n.value;
                Tensor& ga = grad_of(n.a);
                for (int r = 0; r < y.rows; ++r) {
                    double dot = 0.0;
                    for (int c = 0; c < y.cols; ++c) dot += g.at(r, c) * y.at(r, c);
                    for (int c = 0; c < y.cols; ++c) ga.at(r, c) += y.at(r, c) * (g.at(r, c) - dot);
                }
                break;
            }
            case Op::LogSoftmax: {
                const Tensor& y = n.value;
                Tensor& ga = grad_of(n.a);
                for (int r = 0; r < y.rows; ++r) {
                    double gsum = 0.0;
                    for (int c = 0; c < y.cols; ++c) gsum += g.at(r, c);
                    for (int c = 0; c < y.cols; ++c) ga.at(r, c) += g.at(r, c) - std::exp(y.at(r, c)) * gsum;
                }
                break;
            }
            case Op::GatherCols: {
                Tensor& ga = grad_of(n.a);
                for (int r = 0; r < g.rows; ++r) ga.at(r, n.idx[r]) += g.data[r];
                break;
            }
            case Op::RowSum: {
                Tensor& ga = grad_of(n.a);
                for (int r = 0; r < ga.rows; ++r)
                    for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.data[r];
                break;
            }
            case Op::SumAll: {
                Tensor& ga = grad_of(n.a);
                for (double& v : ga.data) v += g.data[0];
                break;
            }
            case Op::MeanAll: {
                Tensor& ga = grad_of(n.a);
                const double s = g.data[0] / ga.size();
                for (double& v : ga.data) v += s;
                break;
            }
            case Op::Huber: {
                const Tensor& pv = nodes_[n.a].value;
                const Tensor& tv = nodes_[n.b].value;
                Tensor& gp = grad_of(n.a);
                Tensor& gt = grad_of(n.b);
                for (int i = 0; i < g.size(); ++i) {
                    const double r = pv.data[i] - tv.data[i];
                    const double d = std::clamp(r, -n.c0, n.c0);
                    gp.data[i] += g.data[i] * d;
                    gt.data[i] -= g.data[i] * d;
                }
                break;
            }
            case Op::CosineRows: {
                const Tensor& av = nodes_[n.a].value;
                const Tensor& bv = nodes_[n.b].value;
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                const double eps = n.c0;
                for (int r = 0; r < av.rows; ++r) {
                    double na2 = 0.0, nb2 = 0.0, dot = 0.0;
                    for (int c = 0; c < av.cols; ++c) {
                        na2 += av.at(r, c) * av.at(r, c);
                        nb2 += bv.at(r, c) * bv.at(r, c);
                        dot += av.at(r, c) * bv.at(r, c);
                    }
                    const double na_raw = std::sqrt(na2);
                    const double nb_raw = std::sqrt(nb2);
                    const double na = std::max(na_raw, eps);
                    const double nb = std::max(nb_raw, eps);
                    const double gr = g.data[r];
                    if (gr == 0.0) continue;
                    const bool a_clamped = na_raw < eps;
                    const bool b_clamped = nb_raw < eps;
                    for (int c = 0; c < av.cols; ++c) {
                        double da = bv.at(r, c) / (na * nb);
                        double db = av.at(r, c) / (na * nb);
                        if (!a_clamped) da -= dot * av.at(r, c) / (na * na * na * nb);
                        if (!b_clamped) db -= dot * bv.at(r, c) / (nb * nb * nb * na);
                        ga.at(r, c) += gr * da;
                        gb.at(r, c) += gr * db;
                    }
                }
                break;
            }
            case Op::ConcatCols: {
                Tensor& ga = grad_of(n.a);
                Tensor& gb = grad_of(n.b);
                for (int r = 0; r < g.rows; ++r) {
                    for (int c = 0; c < ga.cols; ++c) ga.at(r, c) += g.at(r, c);
                    for (int c = 0; c < gb.cols; ++c) gb.at(r, c) += g.at(r, ga.cols + c);
                }
                break;
            }
        }
    }

    GradMap grads;
    for (const auto& [name, id] : param_nodes_) {
        const Node& n = nodes_[id];
        if (n.grad_alloc)
            grads[name] = n.grad;
        else
            grads[name] = Tensor::zeros(n.value.rows, n.value.cols);
    }
    return grads;
}

} // namespace deskrl

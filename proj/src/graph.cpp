#include "uoda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace uoda {

std::size_t Graph::check(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw ContractError("invalid node id " + std::to_string(id));
    }
    return static_cast<std::size_t>(id);
}

NodeId Graph::emplace(Node n) {
    n.grad = Tensor::zeros(n.value.shape());
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(Tensor value) {
    Node n;
    n.op = OpKind::Input;
    n.value = std::move(value);
    return emplace(std::move(n));
}

NodeId Graph::parameter(Tensor value) {
    Node n;
    n.op = OpKind::Parameter;
    n.value = std::move(value);
    NodeId id = emplace(std::move(n));
    parameter_ids_.push_back(id);
    return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Node n;
    n.op = OpKind::Add;
    n.lhs = a;
    n.rhs = b;
    if (va.same_shape(vb)) {
        std::vector<double> out(va.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = va.at(i) + vb.at(i);
        n.value = Tensor(va.shape(), std::move(out));
    } else if (va.is_scalar() || vb.is_scalar()) {
        const Tensor& big = va.is_scalar() ? vb : va;
        double s = va.is_scalar() ? va.item() : vb.item();
        std::vector<double> out(big.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = big.at(i) + s;
        n.value = Tensor(big.shape(), std::move(out));
    } else {
        throw ShapeError("add shape mismatch " + shape_to_string(va.shape()) + " vs " +
                         shape_to_string(vb.shape()));
    }
    return emplace(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Node n;
    n.op = OpKind::Sub;
    n.lhs = a;
    n.rhs = b;
    if (va.same_shape(vb)) {
        std::vector<double> out(va.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = va.at(i) - vb.at(i);
        n.value = Tensor(va.shape(), std::move(out));
    } else if (va.is_scalar() || vb.is_scalar()) {
        const Shape& shape = va.is_scalar() ? vb.shape() : va.shape();
        std::size_t count = shape_numel(shape);
        std::vector<double> out(count);
        for (std::size_t i = 0; i < count; ++i) {
            double l = va.is_scalar() ? va.item() : va.at(i);
            double r = vb.is_scalar() ? vb.item() : vb.at(i);
            out[i] = l - r;
        }
        n.value = Tensor(shape, std::move(out));
    } else {
        throw ShapeError("sub shape mismatch " + shape_to_string(va.shape()) + " vs " +
                         shape_to_string(vb.shape()));
    }
    return emplace(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Node n;
    n.op = OpKind::Mul;
    n.lhs = a;
    n.rhs = b;
    if (va.same_shape(vb)) {
        std::vector<double> out(va.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = va.at(i) * vb.at(i);
        n.value = Tensor(va.shape(), std::move(out));
    } else if (va.is_scalar() || vb.is_scalar()) {
        const Tensor& big = va.is_scalar() ? vb : va;
        double s = va.is_scalar() ? va.item() : vb.item();
        std::vector<double> out(big.numel());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = big.at(i) * s;
        n.value = Tensor(big.shape(), std::move(out));
    } else {
        throw ShapeError("mul shape mismatch " + shape_to_string(va.shape()) + " vs " +
                         shape_to_string(vb.shape()));
    }
    return emplace(std::move(n));
}

NodeId Graph::scalar_mul(NodeId x, double c) {
    const Tensor& v = value(x);
    std::vector<double> out(v.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.at(i) * c;
    Node n;
    n.op = OpKind::ScalarMul;
    n.lhs = x;
    n.coeff = c;
    n.value = Tensor(v.shape(), std::move(out));
    return emplace(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.shape().size() != 2 || vb.shape().size() != 2 || va.cols() != vb.rows()) {
        throw ShapeError("matmul shape mismatch " + shape_to_string(va.shape()) + " vs " +
                         shape_to_string(vb.shape()));
    }
    std::size_t m = va.rows(), k = va.cols(), p = vb.cols();
    Tensor out = Tensor::zeros({m, p});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            double ail = va.at(i, l);
            for (std::size_t j = 0; j < p; ++j) out.at(i, j) += ail * vb.at(l, j);
        }
    }
    Node n;
    n.op = OpKind::MatMul;
    n.lhs = a;
    n.rhs = b;
    n.value = std::move(out);
    return emplace(std::move(n));
}

NodeId Graph::bias_add(NodeId x, NodeId b) {
    const Tensor& vx = value(x);
    const Tensor& vb = value(b);
    if (vx.shape().size() != 2 || vb.shape().size() != 1 || vb.shape()[0] != vx.cols()) {
        throw ShapeError("bias_add shape mismatch " + shape_to_string(vx.shape()) + " vs " +
                         shape_to_string(vb.shape()));
    }
    Tensor out = vx;
    for (std::size_t i = 0; i < vx.rows(); ++i) {
        for (std::size_t j = 0; j < vx.cols(); ++j) out.at(i, j) += vb.at(j);
    }
    Node n;
    n.op = OpKind::BiasAdd;
    n.lhs = x;
    n.rhs = b;
    n.value = std::move(out);
    return emplace(std::move(n));
}

NodeId Graph::relu(NodeId x) {
    const Tensor& v = value(x);
    std::vector<double> out(v.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.at(i) > 0.0 ? v.at(i) : 0.0;
    Node n;
    n.op = OpKind::Relu;
    n.lhs = x;
    n.value = Tensor(v.shape(), std::move(out));
    return emplace(std::move(n));
}

NodeId Graph::exp(NodeId x) {
    const Tensor& v = value(x);
    std::vector<double> out(v.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(v.at(i));
    Node n;
    n.op = OpKind::Exp;
    n.lhs = x;
    n.value = Tensor(v.shape(), std::move(out));
    return emplace(std::move(n));
}

NodeId Graph::log_softmax(NodeId logits) {
    const Tensor& v = value(logits);
    if (v.shape().size() != 2 || v.cols() < 2) {
        throw ContractError("log_softmax expects [B,K] with K >= 2, got " +
                            shape_to_string(v.shape()));
    }
    Tensor out = Tensor::zeros(v.shape());
    for (std::size_t i = 0; i < v.rows(); ++i) {
        double mx = v.at(i, 0);
        for (std::size_t j = 1; j < v.cols(); ++j) mx = std::max(mx, v.at(i, j));
        double sum = 0.0;
        for (std::size_t j = 0; j < v.cols(); ++j) sum += std::exp(v.at(i, j) - mx);
        double lse = mx + std::log(sum);
        for (std::size_t j = 0; j < v.cols(); ++j) out.at(i, j) = v.at(i, j) - lse;
    }
    Node n;
    n.op = OpKind::LogSoftmax;
    n.lhs = logits;
    n.value = std::move(out);
    return emplace(std::move(n));
}

NodeId Graph::row_gather(NodeId x, const std::vector<int>& labels) {
    const Tensor& v = value(x);
    if (v.shape().size() != 2 || labels.size() != v.rows()) {
        throw ShapeError("row_gather needs one label per row of " + shape_to_string(v.shape()) +
                         ", got " + std::to_string(labels.size()));
    }
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= v.cols()) {
            throw ContractError("label " + std::to_string(y) + " out of range [0," +
                                std::to_string(v.cols()) + ") at row " + std::to_string(i));
        }
        out[i] = v.at(i, static_cast<std::size_t>(y));
    }
    Node n;
    n.op = OpKind::RowGather;
    n.lhs = x;
    n.indices = labels;
    n.value = Tensor({labels.size()}, std::move(out));
    return emplace(std::move(n));
}

NodeId Graph::sum_all(NodeId x) {
    const Tensor& v = value(x);
    double s = 0.0;
    for (std::size_t i = 0; i < v.numel(); ++i) s += v.at(i);
    Node n;
    n.op = OpKind::SumAll;
    n.lhs = x;
    n.value = Tensor::scalar(s);
    return emplace(std::move(n));
}

NodeId Graph::mean_all(NodeId x) {
    const Tensor& v = value(x);
    if (v.numel() == 0) throw ContractError("mean_all of empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < v.numel(); ++i) s += v.at(i);
    Node n;
    n.op = OpKind::MeanAll;
    n.lhs = x;
    n.value = Tensor::scalar(s / static_cast<double>(v.numel()));
    return emplace(std::move(n));
}

NodeId Graph::grad_scale(NodeId x, double c) {
    Node n;
    n.op = OpKind::GradScale;
    n.lhs = x;
    n.coeff = c;
    n.value = value(x);
    return emplace(std::move(n));
}

NodeId Graph::stop_gradient(NodeId x) {
    Node n;
    n.op = OpKind::StopGradient;
    n.lhs = x;
    n.value = value(x);
    return emplace(std::move(n));
}

void Graph::zero_grad() {
    for (Node& n : nodes_) n.grad.fill(0.0);
}

GradientMap Graph::backward(NodeId loss) {
    std::size_t loss_idx = check(loss);
    if (!nodes_[loss_idx].value.is_scalar()) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_to_string(nodes_[loss_idx].value.shape()));
    }

    // Per-pass adjoints; folded into the persistent grad slots at the end so
    // repeated backward calls accumulate instead of compounding.
    std::vector<Tensor> adj(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) adj[i] = Tensor::zeros(nodes_[i].value.shape());
    adj[loss_idx].at(0) = 1.0;

    for (std::size_t idx = loss_idx + 1; idx-- > 0;) {
        const Node& n = nodes_[idx];
        const Tensor& g = adj[idx];
        bool any = false;
        for (std::size_t i = 0; i < g.numel() && !any; ++i) any = g.at(i) != 0.0;
        if (!any) continue;

        switch (n.op) {
            case OpKind::Input:
            case OpKind::Parameter:
                break;
            case OpKind::Add:
            case OpKind::Sub: {
                double sign_b = n.op == OpKind::Add ? 1.0 : -1.0;
                Tensor& ga = adj[check(n.lhs)];
                Tensor& gb = adj[check(n.rhs)];
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    double gi = g.at(i);
                    ga.at(ga.is_scalar() ? 0 : i) += gi;
                    gb.at(gb.is_scalar() ? 0 : i) += sign_b * gi;
                }
                break;
            }
            case OpKind::Mul: {
                const Tensor& va = nodes_[check(n.lhs)].value;
                const Tensor& vb = nodes_[check(n.rhs)].value;
                Tensor& ga = adj[check(n.lhs)];
                Tensor& gb = adj[check(n.rhs)];
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    double gi = g.at(i);
                    double a = va.at(va.is_scalar() ? 0 : i);
                    double b = vb.at(vb.is_scalar() ? 0 : i);
                    ga.at(ga.is_scalar() ? 0 : i) += gi * b;
                    gb.at(gb.is_scalar() ? 0 : i) += gi * a;
                }
                break;
            }
            case OpKind::ScalarMul: {
                Tensor& gx = adj[check(n.lhs)];
                for (std::size_t i = 0; i < g.numel(); ++i) gx.at(i) += g.at(i) * n.coeff;
                break;
            }
            case OpKind::MatMul: {
                const Tensor& a = nodes_[check(n.lhs)].value;
                const Tensor& b = nodes_[check(n.rhs)].value;
                Tensor& ga = adj[check(n.lhs)];
                Tensor& gb = adj[check(n.rhs)];
                std::size_t m = a.rows(), k = a.cols(), p = b.cols();
                // dA = dC * B^T ; dB = A^T * dC
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t l = 0; l < k; ++l) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < p; ++j) s += g.at(i * p + j) * b.at(l, j);
                        ga.at(i * k + l) += s;
                    }
                }
                for (std::size_t l = 0; l < k; ++l) {
                    for (std::size_t j = 0; j < p; ++j) {
                        double s = 0.0;
                        for (std::size_t i = 0; i < m; ++i) s += a.at(i, l) * g.at(i * p + j);
                        gb.at(l * p + j) += s;
                    }
                }
                break;
            }
            case OpKind::BiasAdd: {
                Tensor& gx = adj[check(n.lhs)];
                Tensor& gb = adj[check(n.rhs)];
                std::size_t rows = n.value.rows(), cols = n.value.cols();
                for (std::size_t i = 0; i < rows; ++i) {
                    for (std::size_t j = 0; j < cols; ++j) {
                        double gi = g.at(i * cols + j);
                        gx.at(i * cols + j) += gi;
                        gb.at(j) += gi;
                    }
                }
                break;
            }
            case OpKind::Relu: {
                const Tensor& vx = nodes_[check(n.lhs)].value;
                Tensor& gx = adj[check(n.lhs)];
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    if (vx.at(i) > 0.0) gx.at(i) += g.at(i);
                }
                break;
            }
            case OpKind::Exp: {
                Tensor& gx = adj[check(n.lhs)];
                for (std::size_t i = 0; i < g.numel(); ++i) gx.at(i) += g.at(i) * n.value.at(i);
                break;
            }
            case OpKind::LogSoftmax: {
                // dz = g - softmax(z) * rowsum(g)
                Tensor& gx = adj[check(n.lhs)];
                std::size_t rows = n.value.rows(), cols = n.value.cols();
                for (std::size_t i = 0; i < rows; ++i) {
                    double rowsum = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) rowsum += g.at(i * cols + j);
                    for (std::size_t j = 0; j < cols; ++j) {
                        double p = std::exp(n.value.at(i, j));
                        gx.at(i * cols + j) += g.at(i * cols + j) - p * rowsum;
                    }
                }
                break;
            }
            case OpKind::RowGather: {
                Tensor& gx = adj[check(n.lhs)];
                std::size_t cols = nodes_[check(n.lhs)].value.cols();
                for (std::size_t i = 0; i < n.indices.size(); ++i) {
                    gx.at(i * cols + static_cast<std::size_t>(n.indices[i])) += g.at(i);
                }
                break;
            }
            case OpKind::SumAll: {
                Tensor& gx = adj[check(n.lhs)];
                double gi = g.at(0);
                for (std::size_t i = 0; i < gx.numel(); ++i) gx.at(i) += gi;
                break;
            }
            case OpKind::MeanAll: {
                Tensor& gx = adj[check(n.lhs)];
                double gi = g.at(0) / static_cast<double>(gx.numel());
                for (std::size_t i = 0; i < gx.numel(); ++i) gx.at(i) += gi;
                break;
            }
            case OpKind::GradScale: {
                Tensor& gx = adj[check(n.lhs)];
                for (std::size_t i = 0; i < g.numel(); ++i) gx.at(i) += g.at(i) * n.coeff;
                break;
            }
            case OpKind::StopGradient:
                break;
        }
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].grad.add_inplace(adj[i]);

    GradientMap out;
    for (NodeId pid : parameter_ids_) out.emplace(pid, nodes_[check(pid)].grad);
    return out;
}

}  // namespace uoda

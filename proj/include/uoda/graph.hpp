#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "uoda/tensor.hpp"

namespace uoda {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class OpKind {
    Input,
    Parameter,
    Add,
    Sub,
    Mul,
    ScalarMul,
    MatMul,
    BiasAdd,
    Relu,
    Exp,
    LogSoftmax,
    RowGather,
    SumAll,
    MeanAll,
    GradScale,
    StopGradient,
};

struct Node {
    OpKind op;
    NodeId lhs = kNoNode;
    NodeId rhs = kNoNode;
    Tensor value;
    Tensor grad;                // accumulated across backward() calls
    double coeff = 0.0;         // ScalarMul / GradScale factor
    std::vector<int> indices;   // RowGather labels
};

using GradientMap = std::map<NodeId, Tensor>;

// Reverse-mode tape over dense tensors. Nodes are appended in evaluation
// order, so the tape index is a topological order; backward() walks it once
// in reverse. Values are computed eagerly at node creation and never mutated.
// Rebuild a fresh Graph per minibatch.
class Graph {
public:
    NodeId input(Tensor value);
    NodeId parameter(Tensor value);  // trainable leaf

    // Elementwise; shapes must match exactly or one operand must be a
    // single-element tensor (scalar broadcast).
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scalar_mul(NodeId x, double c);

    NodeId matmul(NodeId a, NodeId b);      // [m,k]x[k,n] -> [m,n]
    NodeId bias_add(NodeId x, NodeId b);    // [m,n] + row vector [n]
    NodeId relu(NodeId x);                  // subgradient 0 at exactly 0
    NodeId exp(NodeId x);
    NodeId log_softmax(NodeId logits);      // rowwise, max-shifted
    // value[i] = x(i, labels[i]); labels must lie in [0, cols)
    NodeId row_gather(NodeId x, const std::vector<int>& labels);
    NodeId sum_all(NodeId x);               // scalar {1}
    NodeId mean_all(NodeId x);
    NodeId grad_scale(NodeId x, double c);  // identity forward, c * grad backward
    NodeId stop_gradient(NodeId x);         // identity forward, zero backward

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    const Tensor& grad(NodeId id) const { return nodes_[check(id)].grad; }
    const Node& node(NodeId id) const { return nodes_[check(id)]; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<NodeId>& parameters() const { return parameter_ids_; }

    void zero_grad();

    // Seeds d(loss)/d(loss) = 1, propagates through the tape in reverse, and
    // accumulates the resulting adjoints into every node's grad slot (so
    // calling twice without zero_grad() yields exactly 2x). Returns the
    // accumulated gradients of the parameter leaves.
    GradientMap backward(NodeId loss);

private:
    NodeId emplace(Node n);
    std::size_t check(NodeId id) const;

    std::vector<Node> nodes_;
    std::vector<NodeId> parameter_ids_;
};

}  // namespace uoda

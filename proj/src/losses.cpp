#include "uoda/losses.hpp"

#include <string>

namespace uoda {

void HyperParams::validate() const {
    if (alpha < 0.0 || alpha > 1.0) {
        throw ContractError("alpha must lie in [0,1], got " + std::to_string(alpha));
    }
    if (beta < 0.0) throw ContractError("beta must be >= 0");
    if (lambda_ < 0.0) throw ContractError("lambda must be >= 0");
    if (lr < 0.0) throw ContractError("lr must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ContractError("momentum must lie in [0,1)");
    if (weight_decay < 0.0) throw ContractError("weight_decay must be >= 0");
    if (epochs < 0) throw ContractError("epochs must be >= 0");
    if (batch_s < 1 || batch_u < 1) throw ContractError("batch sizes must be >= 1");
    if (batch_t < 0) throw ContractError("batch_t must be >= 0");
    if (iterations_per_epoch < 0) throw ContractError("iterations_per_epoch must be >= 0");
    if (self_train) {
        if (self_train->start_epoch < 0) throw ContractError("self_train.start_epoch must be >= 0");
        if (self_train->confidence_tau < 0.0) {
            throw ContractError("self_train.confidence_tau must be >= 0");
        }
        if (mode == TrainMode::UDA) {
            throw ContractError("self-training requires labeled-target supervision (SSDA mode)");
        }
    }
}

NodeId cross_entropy(Graph& g, NodeId log_probs, const std::vector<int>& labels) {
    return g.scalar_mul(g.mean_all(g.row_gather(log_probs, labels)), -1.0);
}

NodeId mean_entropy(Graph& g, NodeId log_probs) {
    const Tensor& lp = g.value(log_probs);
    double batch = static_cast<double>(lp.rows());
    NodeId plogp = g.mul(g.exp(log_probs), log_probs);
    return g.scalar_mul(g.sum_all(plogp), -1.0 / batch);
}

namespace {

NodeId require(NodeId id, const char* term) {
    if (id == kNoNode) {
        throw ContractError(std::string("objective needs ") + term + " but it was not built");
    }
    return id;
}

NodeId accumulate(Graph& g, NodeId acc, NodeId term) {
    return acc == kNoNode ? term : g.add(acc, term);
}

}  // namespace

NodeId objective_f1(Graph& g, const LossBundle& b, const HyperParams& h) {
    NodeId obj = kNoNode;
    if (h.mode == TrainMode::UDA) {
        obj = require(b.l_src_1, "L_src_1");
    } else {
        obj = g.scalar_mul(require(b.l_src_1, "L_src_1"), h.alpha);
        obj = accumulate(g, obj, g.scalar_mul(require(b.l_tar_1, "L_tar_1"), 1.0 - h.alpha));
    }
    if (h.beta != 0.0 && !h.entropy_minimization_only) {
        obj = accumulate(g, obj, g.scalar_mul(require(b.h_src, "H_src"), h.beta));
    }
    return obj;
}

NodeId objective_f2(Graph& g, const LossBundle& b, const HyperParams& h) {
    NodeId obj = kNoNode;
    if (h.mode == TrainMode::UDA) {
        obj = require(b.l_src_2, "L_src_2");
    } else {
        obj = g.scalar_mul(require(b.l_src_2, "L_src_2"), 1.0 - h.alpha);
        obj = accumulate(g, obj, g.scalar_mul(require(b.l_tar_2, "L_tar_2"), h.alpha));
    }
    if (h.lambda_ != 0.0) {
        double sign = h.entropy_minimization_only ? 1.0 : -1.0;
        obj = accumulate(g, obj, g.scalar_mul(require(b.h_tar, "H_tar"), sign * h.lambda_));
    }
    return obj;
}

NodeId objective_g(Graph& g, const LossBundle& b, const HyperParams& h) {
    NodeId obj = require(b.l_src_1, "L_src_1");
    if (h.mode == TrainMode::SSDA) {
        obj = g.add(obj, require(b.l_tar_2, "L_tar_2"));
    }
    if (h.generator_supervision == GeneratorSupervision::AllHeads) {
        obj = g.add(obj, require(b.l_src_2, "L_src_2"));
        if (h.mode == TrainMode::SSDA) obj = g.add(obj, require(b.l_tar_1, "L_tar_1"));
    }
    if (h.beta != 0.0 && !h.entropy_minimization_only) {
        obj = g.add(obj, g.scalar_mul(require(b.h_src, "H_src"), -h.beta));
    }
    if (h.lambda_ != 0.0) {
        obj = g.add(obj, g.scalar_mul(require(b.h_tar, "H_tar"), h.lambda_));
    }
    return obj;
}

}  // namespace uoda

#pragma once

#include <optional>
#include <vector>

#include "uoda/graph.hpp"

namespace uoda {

enum class TrainMode { SSDA, UDA };

// Generator supervision term in the generator objective: each loss through
// its designated head (L_src via head 1, L_tar via head 2), or all four
// per-head supervision terms summed.
enum class GeneratorSupervision { PerHead, AllHeads };

struct SelfTrainParams {
    int start_epoch = 0;
    double confidence_tau = 0.9;
    bool require_agreement = true;
};

struct HyperParams {
    double alpha = 0.75;   // supervision asymmetry between the heads
    double beta = 0.1;     // source-entropy weight
    double lambda_ = 0.1;  // target-entropy weight
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int epochs = 100;
    int batch_s = 24;
    int batch_t = 0;  // 0 = min(2K, |T|)
    int batch_u = 24;
    int iterations_per_epoch = 0;  // 0 = ceil(N_u / batch_u)
    TrainMode mode = TrainMode::SSDA;
    GeneratorSupervision generator_supervision = GeneratorSupervision::PerHead;
    // True switches both F2 and G to plain entropy minimization (the
    // non-adversarial ENT baseline); H_src drops out entirely.
    bool entropy_minimization_only = false;
    std::optional<SelfTrainParams> self_train;

    void validate() const;
};

// Scalar loss nodes of one forward pass. kNoNode marks terms that do not
// exist for the pass (UDA mode, or a phase that does not need them).
struct LossBundle {
    NodeId l_src_1 = kNoNode;
    NodeId l_tar_1 = kNoNode;
    NodeId l_src_2 = kNoNode;
    NodeId l_tar_2 = kNoNode;
    NodeId h_src = kNoNode;
    NodeId h_tar = kNoNode;
};

// Mean over the batch of -log p(y_i); labels in [0, K).
NodeId cross_entropy(Graph& g, NodeId log_probs, const std::vector<int>& labels);

// Mean over the batch of -sum_k p_k log p_k, computed as -sum exp(lp)*lp.
NodeId mean_entropy(Graph& g, NodeId log_probs);

// SSDA: alpha*L_src_1 + (1-alpha)*L_tar_1 + beta*H_src
// UDA:  L_src_1 + beta*H_src
NodeId objective_f1(Graph& g, const LossBundle& b, const HyperParams& h);

// SSDA: (1-alpha)*L_src_2 + alpha*L_tar_2 - lambda*H_tar
// UDA:  L_src_2 - lambda*H_tar
// (entropy_minimization_only flips the H_tar sign to +lambda.)
NodeId objective_f2(Graph& g, const LossBundle& b, const HyperParams& h);

// SSDA: L_src_1 + L_tar_2 - beta*H_src + lambda*H_tar
// UDA:  L_src_1 - beta*H_src + lambda*H_tar
// (AllHeads adds the remaining supervision terms; entropy_minimization_only
// drops H_src and keeps +lambda*H_tar.)
NodeId objective_g(Graph& g, const LossBundle& b, const HyperParams& h);

}  // namespace uoda

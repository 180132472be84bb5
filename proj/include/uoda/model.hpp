#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uoda/graph.hpp"
#include "uoda/tensor.hpp"

namespace uoda {

// Layer widths from input to output; relu on hidden layers, identity output.
struct MlpSpec {
    std::vector<int> layer_widths;

    void validate() const;
    int input_width() const { return layer_widths.front(); }
    int output_width() const { return layer_widths.back(); }
};

struct LayerParams {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
};

struct MlpParams {
    std::vector<LayerParams> layers;
};

// Feature generator plus the two classifier heads. The head parameter sets
// are disjoint and independently initialized; head 1 scatters source
// features, head 2 clusters target features.
struct UodaModel {
    MlpSpec generator_spec;
    MlpSpec head_spec;  // shared shape, separate parameters per head
    MlpParams generator;
    MlpParams classifier1;
    MlpParams classifier2;
    int input_dim = 0;
    int feature_dim = 0;
    int num_classes = 0;
};

// Glorot-uniform weights (s = sqrt(6/(fan_in+fan_out))), zero biases.
// Deterministic per seed; the three parameter groups use distinct substreams.
UodaModel init_model(int input_dim, const std::vector<int>& hidden, int feature_dim, int K,
                     std::uint64_t seed, const std::vector<int>& head_hidden = {});

// Graph-building forward passes (used by the trainer and gradient checks).
struct BoundMlp {
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;

    std::vector<NodeId> all() const;
};

BoundMlp bind_mlp(Graph& g, const MlpParams& params, bool trainable);
NodeId mlp_apply(Graph& g, const BoundMlp& bound, NodeId x);

NodeId features(Graph& g, const BoundMlp& generator, NodeId x);
NodeId class_log_probs(Graph& g, const UodaModel& m, const BoundMlp& head_params, int head,
                       NodeId feats);

// One-shot evaluation (fresh internal graph, gradients discarded).
Tensor eval_features(const UodaModel& m, const Tensor& x);
Tensor eval_class_log_probs(const UodaModel& m, int head, const Tensor& x);

// Versioned JSON checkpoint; round-trip is value-exact.
void save_checkpoint(const UodaModel& m, const std::string& path);
UodaModel load_checkpoint(const std::string& path);

std::vector<Tensor*> group_tensors(MlpParams& p);
std::vector<const Tensor*> group_tensors(const MlpParams& p);

}  // namespace uoda

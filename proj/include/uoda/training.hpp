#pragma once

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "uoda/data.hpp"
#include "uoda/evaluation.hpp"
#include "uoda/losses.hpp"
#include "uoda/model.hpp"

namespace uoda {

struct OptimizerState {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::vector<Tensor> velocity;  // one per parameter tensor, zero-initialized

    static OptimizerState from(const HyperParams& h) {
        return OptimizerState{h.lr, h.momentum, h.weight_decay, {}};
    }
};

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr*v
void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              OptimizerState& state);

struct IterationBatches {
    Tensor xs;             // [Bs, D]
    std::vector<int> ys;
    Tensor xt;             // [Bt, D]; empty allowed only in UDA mode
    std::vector<int> yt;
    Tensor xu;             // [Bu, D]
};

struct TrainState {
    UodaModel model;
    OptimizerState opt_g, opt_f1, opt_f2;
    int epoch = 0;
    long long iteration = 0;
    std::vector<LabeledExample> pseudo_labeled;
    std::vector<char> pseudo_adopted;  // parallel to the dataset's U
};

enum class Phase { F1, F2, G };

// Scalar loss values observed during the most recent phase forward.
struct PhaseLosses {
    double objective = 0.0;
    double l_src = 0.0;
    double l_tar = 0.0;
    double entropy = 0.0;
};

// One update of a single parameter group on the given minibatches: fresh
// forward, backward of the phase objective, one optimizer step. The other
// two groups are left untouched.
PhaseLosses run_phase(TrainState& state, const IterationBatches& batches, const HyperParams& h,
                      Phase phase);

// Algorithm step t: update Theta_F1, then Theta_F2, then Theta_G, each on a
// fresh forward over the same minibatches.
void train_iteration(TrainState& state, const IterationBatches& batches, const HyperParams& h);

struct MetricRow {
    int epoch = 0;
    double l_src_1 = 0.0;
    double l_tar_2 = 0.0;
    double h_src = 0.0;
    double h_tar = 0.0;
    double objective_g = 0.0;
    double target_test_accuracy = 0.0;
    double unlabeled_accuracy = 0.0;
    double d_hat_max = 0.0;
    long long pseudo_label_count = 0;
    long long wall_time_ms = 0;
};

using MetricLog = std::vector<MetricRow>;

struct TrainCallbacks {
    std::function<void(const MetricRow&)> on_metrics;          // every metric row, epoch 0 first
    std::function<void(const FeatureSnapshot&)> on_snapshot;   // per cadence + final epoch
    int metric_every = 1;
    int snapshot_every = 0;  // 0 disables snapshots
};

struct TrainResult {
    TrainState state;
    MetricLog metrics;
};

// Runs epochs x iterations-per-epoch sequential three-phase updates over
// freshly shuffled minibatches; fully deterministic per (seed, h, dataset).
TrainResult train(const SsdaDataset& dataset, const HyperParams& h, std::uint64_t seed,
                  const TrainCallbacks& callbacks = {}, const std::vector<int>& hidden = {32},
                  int feature_dim = 2, const std::vector<int>& head_hidden = {});

// UDA entry point: target_labeled may be empty; all L_tar terms are dropped.
TrainResult uda_train(const SsdaDataset& dataset, HyperParams h, std::uint64_t seed,
                      const TrainCallbacks& callbacks = {}, const std::vector<int>& hidden = {32},
                      int feature_dim = 2, const std::vector<int>& head_hidden = {});

// Adopts not-yet-adopted unlabeled samples whose two per-head predictions
// agree (when required) and whose mean max-probability reaches the
// confidence threshold. Adopted pairs are immutable and join the labeled
// target supervision.
int self_train_update(TrainState& state, const std::vector<std::vector<double>>& unlabeled,
                      const HyperParams& h);

// Batch schedule used by train(); exposed so oracles can replay the exact
// minibatch sequence.
class BatchSampler {
public:
    BatchSampler(const SsdaDataset& dataset, const HyperParams& h, std::uint64_t seed);

    // Labeled-target batches draw from T plus any adopted pseudo-labels.
    IterationBatches next(const std::vector<LabeledExample>& pseudo_labeled);

    int iterations_per_epoch() const { return iterations_per_epoch_; }
    int effective_batch_t(std::size_t labeled_target_size) const;

private:
    const SsdaDataset& dataset_;
    HyperParams h_;
    std::mt19937_64 rng_;
    int iterations_per_epoch_;
};

}  // namespace uoda

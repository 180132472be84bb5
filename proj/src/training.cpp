#include "uoda/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "uoda/rng.hpp"

namespace uoda {

void sgd_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
              OptimizerState& state) {
    if (params.size() != grads.size()) {
        throw ContractError("sgd_step: " + std::to_string(params.size()) + " params vs " +
                            std::to_string(grads.size()) + " grads");
    }
    if (state.velocity.empty()) {
        for (const Tensor* p : params) state.velocity.push_back(Tensor::zeros(p->shape()));
    }
    if (state.velocity.size() != params.size()) {
        throw ContractError("sgd_step: velocity table does not match parameter group");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& v = state.velocity[i];
        if (!p.same_shape(g) || !p.same_shape(v)) {
            throw ContractError("sgd_step: shape mismatch at parameter " + std::to_string(i) +
                                " (" + shape_to_string(p.shape()) + " vs " +
                                shape_to_string(g.shape()) + ")");
        }
        for (std::size_t j = 0; j < p.numel(); ++j) {
            v.at(j) = state.momentum * v.at(j) + (g.at(j) + state.weight_decay * p.at(j));
            p.at(j) = p.at(j) - state.lr * v.at(j);
        }
    }
}

namespace {

struct PhaseGraph {
    Graph g;
    LossBundle bundle;
    BoundMlp trainable;
};

void check_finite(const Graph& g, NodeId id, const char* term, long long iteration) {
    if (id == kNoNode) return;
    if (!g.value(id).all_finite()) throw TrainingDiverged(term, iteration);
}

// Builds the forward pass for one phase. Phases F1/F2 freeze the generator
// by routing features through stop_gradient; phase G binds the heads as
// plain inputs so gradients flow through them into the generator without
// touching their values.
PhaseGraph build_phase(const TrainState& state, const IterationBatches& batches,
                       const HyperParams& h, Phase phase) {
    PhaseGraph pg;
    Graph& g = pg.g;
    const UodaModel& m = state.model;
    bool ssda = h.mode == TrainMode::SSDA;
    bool train_g = phase == Phase::G;

    BoundMlp gen = bind_mlp(g, m.generator, train_g);
    auto embed = [&](const Tensor& x) {
        NodeId f = features(g, gen, g.input(x));
        return train_g ? f : g.stop_gradient(f);
    };

    switch (phase) {
        case Phase::F1: {
            BoundMlp f1 = bind_mlp(g, m.classifier1, true);
            pg.trainable = f1;
            NodeId lp_s = class_log_probs(g, m, f1, 1, embed(batches.xs));
            pg.bundle.l_src_1 = cross_entropy(g, lp_s, batches.ys);
            if (ssda) {
                NodeId lp_t = class_log_probs(g, m, f1, 1, embed(batches.xt));
                pg.bundle.l_tar_1 = cross_entropy(g, lp_t, batches.yt);
            }
            if (h.beta != 0.0 && !h.entropy_minimization_only) {
                pg.bundle.h_src = mean_entropy(g, lp_s);
            }
            break;
        }
        case Phase::F2: {
            BoundMlp f2 = bind_mlp(g, m.classifier2, true);
            pg.trainable = f2;
            NodeId lp_s = class_log_probs(g, m, f2, 2, embed(batches.xs));
            pg.bundle.l_src_2 = cross_entropy(g, lp_s, batches.ys);
            if (ssda) {
                NodeId lp_t = class_log_probs(g, m, f2, 2, embed(batches.xt));
                pg.bundle.l_tar_2 = cross_entropy(g, lp_t, batches.yt);
            }
            if (h.lambda_ != 0.0) {
                NodeId lp_u = class_log_probs(g, m, f2, 2, embed(batches.xu));
                pg.bundle.h_tar = mean_entropy(g, lp_u);
            }
            break;
        }
        case Phase::G: {
            BoundMlp f1 = bind_mlp(g, m.classifier1, false);
            BoundMlp f2 = bind_mlp(g, m.classifier2, false);
            pg.trainable = gen;
            bool all_heads = h.generator_supervision == GeneratorSupervision::AllHeads;

            NodeId fs = embed(batches.xs);
            NodeId lp1_s = class_log_probs(g, m, f1, 1, fs);
            pg.bundle.l_src_1 = cross_entropy(g, lp1_s, batches.ys);
            if (all_heads) {
                NodeId lp2_s = class_log_probs(g, m, f2, 2, fs);
                pg.bundle.l_src_2 = cross_entropy(g, lp2_s, batches.ys);
            }
            if (ssda) {
                NodeId ft = embed(batches.xt);
                NodeId lp2_t = class_log_probs(g, m, f2, 2, ft);
                pg.bundle.l_tar_2 = cross_entropy(g, lp2_t, batches.yt);
                if (all_heads) {
                    NodeId lp1_t = class_log_probs(g, m, f1, 1, ft);
                    pg.bundle.l_tar_1 = cross_entropy(g, lp1_t, batches.yt);
                }
            }
            if (h.beta != 0.0 && !h.entropy_minimization_only) {
                pg.bundle.h_src = mean_entropy(g, lp1_s);
            }
            if (h.lambda_ != 0.0) {
                NodeId lp2_u = class_log_probs(g, m, f2, 2, embed(batches.xu));
                pg.bundle.h_tar = mean_entropy(g, lp2_u);
            }
            break;
        }
    }
    return pg;
}

MlpParams& phase_params(TrainState& state, Phase phase) {
    switch (phase) {
        case Phase::F1: return state.model.classifier1;
        case Phase::F2: return state.model.classifier2;
        case Phase::G: return state.model.generator;
    }
    throw ContractError("unknown phase");
}

OptimizerState& phase_optimizer(TrainState& state, Phase phase) {
    switch (phase) {
        case Phase::F1: return state.opt_f1;
        case Phase::F2: return state.opt_f2;
        case Phase::G: return state.opt_g;
    }
    throw ContractError("unknown phase");
}

}  // namespace

PhaseLosses run_phase(TrainState& state, const IterationBatches& batches, const HyperParams& h,
                      Phase phase) {
    if (batches.xs.numel() == 0 || batches.xu.numel() == 0) {
        throw ContractError("source and unlabeled batches must be nonempty");
    }
    if (h.mode == TrainMode::SSDA && batches.xt.numel() == 0) {
        throw ContractError("labeled-target batch may be empty only in UDA mode");
    }

    PhaseGraph pg = build_phase(state, batches, h, phase);
    Graph& g = pg.g;

    NodeId objective = kNoNode;
    switch (phase) {
        case Phase::F1: objective = objective_f1(g, pg.bundle, h); break;
        case Phase::F2: objective = objective_f2(g, pg.bundle, h); break;
        case Phase::G: objective = objective_g(g, pg.bundle, h); break;
    }

    check_finite(g, pg.bundle.l_src_1, "L_src_1", state.iteration);
    check_finite(g, pg.bundle.l_tar_1, "L_tar_1", state.iteration);
    check_finite(g, pg.bundle.l_src_2, "L_src_2", state.iteration);
    check_finite(g, pg.bundle.l_tar_2, "L_tar_2", state.iteration);
    check_finite(g, pg.bundle.h_src, "H_src", state.iteration);
    check_finite(g, pg.bundle.h_tar, "H_tar", state.iteration);
    check_finite(g, objective, "objective", state.iteration);

    GradientMap grads = g.backward(objective);

    std::vector<Tensor*> params = group_tensors(phase_params(state, phase));
    std::vector<NodeId> ids = pg.trainable.all();
    std::vector<const Tensor*> grad_ptrs;
    for (NodeId id : ids) grad_ptrs.push_back(&grads.at(id));
    sgd_step(params, grad_ptrs, phase_optimizer(state, phase));

    PhaseLosses out;
    out.objective = g.value(objective).item();
    auto value_or = [&](NodeId id) { return id == kNoNode ? 0.0 : g.value(id).item(); };
    switch (phase) {
        case Phase::F1:
            out.l_src = value_or(pg.bundle.l_src_1);
            out.l_tar = value_or(pg.bundle.l_tar_1);
            out.entropy = value_or(pg.bundle.h_src);
            break;
        case Phase::F2:
            out.l_src = value_or(pg.bundle.l_src_2);
            out.l_tar = value_or(pg.bundle.l_tar_2);
            out.entropy = value_or(pg.bundle.h_tar);
            break;
        case Phase::G:
            out.l_src = value_or(pg.bundle.l_src_1);
            out.l_tar = value_or(pg.bundle.l_tar_2);
            out.entropy = value_or(pg.bundle.h_tar);
            break;
    }
    return out;
}

void train_iteration(TrainState& state, const IterationBatches& batches, const HyperParams& h) {
    state.iteration += 1;
    run_phase(state, batches, h, Phase::F1);
    run_phase(state, batches, h, Phase::F2);
    run_phase(state, batches, h, Phase::G);
}

BatchSampler::BatchSampler(const SsdaDataset& dataset, const HyperParams& h, std::uint64_t seed)
    : dataset_(dataset), h_(h), rng_(seed) {
    auto n_u = static_cast<long long>(dataset.target_unlabeled().size());
    if (n_u == 0) throw ContractError("training requires a nonempty unlabeled pool");
    iterations_per_epoch_ =
        h.iterations_per_epoch > 0
            ? h.iterations_per_epoch
            : static_cast<int>((n_u + h.batch_u - 1) / h.batch_u);
}

int BatchSampler::effective_batch_t(std::size_t labeled_target_size) const {
    if (labeled_target_size == 0) return 0;
    auto cap = static_cast<std::size_t>(
        h_.batch_t > 0 ? h_.batch_t : 2 * dataset_.num_classes());
    return static_cast<int>(std::min(cap, labeled_target_size));
}

IterationBatches BatchSampler::next(const std::vector<LabeledExample>& pseudo_labeled) {
    auto draw = [&](std::size_t pool, std::size_t count) {
        std::vector<std::size_t> idx(pool);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool - 1);
            std::swap(idx[i], idx[pick(rng_)]);
        }
        idx.resize(count);
        return idx;
    };

    IterationBatches b;
    auto d = static_cast<std::size_t>(dataset_.input_dim());

    const auto& source = dataset_.source();
    std::size_t bs = std::min(static_cast<std::size_t>(h_.batch_s), source.size());
    b.xs = Tensor::zeros({bs, d});
    for (std::size_t r : draw(source.size(), bs)) {
        std::size_t row = b.ys.size();
        for (std::size_t j = 0; j < d; ++j) b.xs.at(row, j) = source[r].x[j];
        b.ys.push_back(source[r].y);
    }

    if (h_.mode == TrainMode::SSDA) {
        std::size_t pool = dataset_.target_labeled().size() + pseudo_labeled.size();
        auto bt = static_cast<std::size_t>(effective_batch_t(pool));
        b.xt = Tensor::zeros({bt, d});
        for (std::size_t r : draw(pool, bt)) {
            const LabeledExample& e = r < dataset_.target_labeled().size()
                                          ? dataset_.target_labeled()[r]
                                          : pseudo_labeled[r - dataset_.target_labeled().size()];
            std::size_t row = b.yt.size();
            for (std::size_t j = 0; j < d; ++j) b.xt.at(row, j) = e.x[j];
            b.yt.push_back(e.y);
        }
    } else {
        b.xt = Tensor::zeros({0, d});
    }

    const auto& unlabeled = dataset_.target_unlabeled();
    std::size_t bu = std::min(static_cast<std::size_t>(h_.batch_u), unlabeled.size());
    b.xu = Tensor::zeros({bu, d});
    std::size_t row = 0;
    for (std::size_t r : draw(unlabeled.size(), bu)) {
        for (std::size_t j = 0; j < d; ++j) b.xu.at(row, j) = unlabeled[r][j];
        ++row;
    }
    return b;
}

int self_train_update(TrainState& state, const std::vector<std::vector<double>>& unlabeled,
                      const HyperParams& h) {
    if (!h.self_train) throw ContractError("self_train_update without self_train params");
    if (state.pseudo_adopted.size() != unlabeled.size()) {
        state.pseudo_adopted.assign(unlabeled.size(), 0);
    }
    Tensor x = stack_rows(unlabeled);
    Tensor lp1 = eval_class_log_probs(state.model, 1, x);
    Tensor lp2 = eval_class_log_probs(state.model, 2, x);

    int adopted = 0;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
        if (state.pseudo_adopted[i]) continue;
        int a1 = argmax_row(lp1, i);
        int a2 = argmax_row(lp2, i);
        if (h.self_train->require_agreement && a1 != a2) continue;
        double conf = (std::exp(lp1.at(i, static_cast<std::size_t>(a1))) +
                       std::exp(lp2.at(i, static_cast<std::size_t>(a2)))) /
                      2.0;
        if (conf < h.self_train->confidence_tau) continue;

        int label = a1;
        if (a1 != a2) {
            // heads disagree but agreement is not required: vote by mean probability
            double best = -1.0;
            for (std::size_t k = 0; k < lp1.cols(); ++k) {
                double p = (std::exp(lp1.at(i, k)) + std::exp(lp2.at(i, k))) / 2.0;
                if (p > best) {
                    best = p;
                    label = static_cast<int>(k);
                }
            }
        }
        state.pseudo_labeled.push_back({unlabeled[i], label});
        state.pseudo_adopted[i] = 1;
        ++adopted;
    }
    return adopted;
}

namespace {

double cross_entropy_value(const Tensor& log_probs, const std::vector<int>& labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        s -= log_probs.at(i, static_cast<std::size_t>(labels[i]));
    }
    return s / static_cast<double>(labels.size());
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

MetricRow compute_metrics(const TrainState& state, const SsdaDataset& dataset,
                          const HyperParams& h,
                          std::chrono::steady_clock::time_point started) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    MetricRow row;
    row.epoch = state.epoch;

    Tensor xs = stack_features(dataset.source());
    std::vector<int> ys = labels_of(dataset.source());
    Tensor lp1_s = eval_class_log_probs(state.model, 1, xs);
    row.l_src_1 = cross_entropy_value(lp1_s, ys);
    std::vector<double> src_entropy = per_sample_entropy(lp1_s);
    row.h_src = mean_of(src_entropy);

    double l_tar_1 = nan, l_src_2 = nan;
    row.l_tar_2 = nan;
    if (!dataset.target_labeled().empty()) {
        Tensor xt = stack_features(dataset.target_labeled());
        std::vector<int> yt = labels_of(dataset.target_labeled());
        row.l_tar_2 = cross_entropy_value(eval_class_log_probs(state.model, 2, xt), yt);
        if (h.generator_supervision == GeneratorSupervision::AllHeads) {
            l_tar_1 = cross_entropy_value(eval_class_log_probs(state.model, 1, xt), yt);
        }
    }
    if (h.generator_supervision == GeneratorSupervision::AllHeads) {
        l_src_2 = cross_entropy_value(eval_class_log_probs(state.model, 2, xs), ys);
    }

    row.h_tar = nan;
    row.unlabeled_accuracy = nan;
    row.d_hat_max = nan;
    if (!dataset.target_unlabeled().empty()) {
        Tensor xu = stack_rows(dataset.target_unlabeled());
        Tensor lp2_u = eval_class_log_probs(state.model, 2, xu);
        std::vector<double> tar_entropy = per_sample_entropy(lp2_u);
        row.h_tar = mean_of(tar_entropy);
        row.unlabeled_accuracy =
            accuracy(state.model, 2, xu, dataset.unlabeled_labels_for_eval());
        row.d_hat_max = divergence_from_entropies(src_entropy, tar_entropy,
                                                  default_gamma_grid(dataset.num_classes()),
                                                  dataset.num_classes())
                            .d_hat_max;
    }

    double obj = row.l_src_1;
    if (h.mode == TrainMode::SSDA && !std::isnan(row.l_tar_2)) obj += row.l_tar_2;
    if (h.generator_supervision == GeneratorSupervision::AllHeads) {
        if (!std::isnan(l_src_2)) obj += l_src_2;
        if (h.mode == TrainMode::SSDA && !std::isnan(l_tar_1)) obj += l_tar_1;
    }
    if (h.beta != 0.0 && !h.entropy_minimization_only) obj -= h.beta * row.h_src;
    if (h.lambda_ != 0.0 && !std::isnan(row.h_tar)) obj += h.lambda_ * row.h_tar;
    row.objective_g = obj;

    row.target_test_accuracy =
        dataset.target_test().empty() ? nan : accuracy(state.model, 2, dataset.target_test());
    row.pseudo_label_count = static_cast<long long>(state.pseudo_labeled.size());
    row.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    return row;
}

}  // namespace

TrainResult train(const SsdaDataset& dataset, const HyperParams& h, std::uint64_t seed,
                  const TrainCallbacks& callbacks, const std::vector<int>& hidden,
                  int feature_dim, const std::vector<int>& head_hidden) {
    h.validate();
    if (h.mode == TrainMode::SSDA && dataset.target_labeled().empty()) {
        throw ContractError("SSDA mode requires a nonempty labeled target set");
    }

    auto started = std::chrono::steady_clock::now();
    TrainResult result;
    result.state.model = init_model(dataset.input_dim(), hidden, feature_dim,
                                    dataset.num_classes(), substream_seed(seed, "init"),
                                    head_hidden);
    result.state.opt_g = OptimizerState::from(h);
    result.state.opt_f1 = OptimizerState::from(h);
    result.state.opt_f2 = OptimizerState::from(h);
    result.state.pseudo_adopted.assign(dataset.target_unlabeled().size(), 0);

    auto log_metrics = [&]() {
        MetricRow row = compute_metrics(result.state, dataset, h, started);
        result.metrics.push_back(row);
        if (callbacks.on_metrics) callbacks.on_metrics(row);
    };
    auto log_snapshot = [&]() {
        if (callbacks.snapshot_every > 0 && callbacks.on_snapshot) {
            callbacks.on_snapshot(snapshot_features(result.state.model, dataset,
                                                    result.state.epoch));
        }
    };

    log_metrics();
    log_snapshot();

    if (h.epochs == 0) return result;

    int metric_every = std::max(1, callbacks.metric_every);
    BatchSampler sampler(dataset, h, substream_seed(seed, "shuffle"));
    for (int epoch = 1; epoch <= h.epochs; ++epoch) {
        for (int it = 0; it < sampler.iterations_per_epoch(); ++it) {
            IterationBatches batches = sampler.next(result.state.pseudo_labeled);
            train_iteration(result.state, batches, h);
        }
        result.state.epoch = epoch;
        if (h.self_train && epoch >= h.self_train->start_epoch) {
            self_train_update(result.state, dataset.target_unlabeled(), h);
        }
        if (epoch % metric_every == 0 || epoch == h.epochs) log_metrics();
        if (callbacks.snapshot_every > 0 &&
            (epoch % callbacks.snapshot_every == 0 || epoch == h.epochs)) {
            log_snapshot();
        }
    }
    return result;
}

TrainResult uda_train(const SsdaDataset& dataset, HyperParams h, std::uint64_t seed,
                      const TrainCallbacks& callbacks, const std::vector<int>& hidden,
                      int feature_dim, const std::vector<int>& head_hidden) {
    h.mode = TrainMode::UDA;
    return train(dataset, h, seed, callbacks, hidden, feature_dim, head_hidden);
}

}  // namespace uoda

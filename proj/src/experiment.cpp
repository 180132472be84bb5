#include "uoda/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "uoda/evaluation.hpp"

namespace uoda {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kMetricsHeader =
    "epoch,L_src_1,L_tar_2,H_src,H_tar,objective_g,target_test_accuracy,unlabeled_accuracy,"
    "d_hat_max,pseudo_label_count,wall_time_ms";

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string metrics_row_csv(const MetricRow& r) {
    std::ostringstream out;
    out << r.epoch << "," << fmt(r.l_src_1) << "," << fmt(r.l_tar_2) << "," << fmt(r.h_src) << ","
        << fmt(r.h_tar) << "," << fmt(r.objective_g) << "," << fmt(r.target_test_accuracy) << ","
        << fmt(r.unlabeled_accuracy) << "," << fmt(r.d_hat_max) << "," << r.pseudo_label_count
        << "," << r.wall_time_ms;
    return out.str();
}

RunOutputs run_experiment(const ExperimentConfig& config, std::ostream* log) {
    config.validate();
    auto started = std::chrono::steady_clock::now();

    fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    fs::path snap_dir = out_dir / "snapshots";
    if (config.snapshot_every > 0) fs::create_directories(snap_dir);

    SsdaDataset dataset = build_dataset(config);

    RunOutputs outputs;
    outputs.metrics_csv = (out_dir / "metrics.csv").string();
    outputs.divergence_json = (out_dir / "divergence.json").string();
    outputs.checkpoint = (out_dir / "checkpoint.json").string();
    outputs.manifest = (out_dir / "manifest.json").string();

    std::ofstream metrics(outputs.metrics_csv);
    if (!metrics) throw std::runtime_error("cannot write " + outputs.metrics_csv);
    metrics << kMetricsHeader << "\n";

    TrainCallbacks callbacks;
    callbacks.metric_every = config.metric_every;
    callbacks.snapshot_every = config.snapshot_every;
    callbacks.on_metrics = [&](const MetricRow& row) {
        metrics << metrics_row_csv(row) << "\n";
        metrics.flush();
        if (log) {
            *log << "epoch " << row.epoch << " test_acc " << row.target_test_accuracy
                 << " unlabeled_acc " << row.unlabeled_accuracy << " d_hat_max " << row.d_hat_max
                 << "\n";
        }
    };
    callbacks.on_snapshot = [&](const FeatureSnapshot& snapshot) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%06d.csv", snapshot.epoch);
        fs::path p = snap_dir / name;
        write_snapshot_csv(snapshot, p.string());
        outputs.snapshots.push_back(p.string());
    };

    TrainResult result = train(dataset, config.hp, config.seed, callbacks, config.model.hidden,
                               config.model.feature_dim, config.model.head_hidden);
    outputs.final_metrics = result.metrics.back();

    DivergenceReport div =
        estimate_divergence(result.state.model, dataset.source(), dataset.target_unlabeled(),
                            default_gamma_grid(dataset.num_classes()));
    write_divergence_json(div, outputs.divergence_json);
    outputs.final_bound = bound_report(result.state.model, dataset.source(),
                                       dataset.target_unlabeled(),
                                       default_gamma_grid(dataset.num_classes()));
    save_checkpoint(result.state.model, outputs.checkpoint);

    auto duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    std::ofstream manifest(outputs.manifest);
    if (!manifest) throw std::runtime_error("cannot write " + outputs.manifest);
    manifest << manifest_json_text(config, outputs, duration_ms) << "\n";
    return outputs;
}

std::string manifest_json_text(const ExperimentConfig& config, const RunOutputs& outputs,
                               long long duration_ms) {
    json j;
    j["schema"] = 1;
    j["method"] = method_name(config.method);
    j["seed"] = config.seed;
    j["config_ini"] = to_ini(config);
    j["outputs"] = {{"metrics_csv", outputs.metrics_csv},
                    {"divergence_json", outputs.divergence_json},
                    {"checkpoint", outputs.checkpoint},
                    {"snapshots", outputs.snapshots}};
    j["final"] = {{"epoch", outputs.final_metrics.epoch},
                  {"target_test_accuracy", outputs.final_metrics.target_test_accuracy},
                  {"unlabeled_accuracy", outputs.final_metrics.unlabeled_accuracy},
                  {"d_hat_max", outputs.final_metrics.d_hat_max},
                  {"pseudo_label_count", outputs.final_metrics.pseudo_label_count}};
    j["final_bound_report"] = {{"empirical_source_risk", outputs.final_bound.empirical_source_risk},
                               {"d_hat_max", outputs.final_bound.d_hat_max},
                               {"bound_partial", outputs.final_bound.bound_partial},
                               {"delta", outputs.final_bound.delta}};
    j["duration_ms"] = duration_ms;
    return j.dump(2);
}

ExperimentConfig config_from_manifest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open manifest: " + path);
    json j = json::parse(in);
    return parse_config_text(j.at("config_ini").get<std::string>());
}

ExperimentConfig load_run_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file: " + path);
    char first = 0;
    in >> first;
    in.close();
    if (first == '{') return config_from_manifest_file(path);
    return parse_config_file(path);
}

SweepResult sweep(const ExperimentConfig& base, const std::string& param,
                  const std::vector<double>& values, std::ostream* log) {
    if (param != "alpha" && param != "beta" && param != "lambda" && param != "k_shot") {
        throw ContractError("sweep param must be one of alpha, beta, lambda, k_shot");
    }
    if (values.empty()) throw ContractError("sweep needs at least one value");

    SweepResult result;
    result.param = param;
    fs::path root(base.output_dir);
    fs::create_directories(root);

    for (double value : values) {
        ExperimentConfig c = base;
        if (param == "alpha") {
            c.hp.alpha = value;
        } else if (param == "beta") {
            c.hp.beta = value;
        } else if (param == "lambda") {
            c.hp.lambda_ = value;
        } else {
            double rounded = std::round(value);
            if (rounded != value || rounded < 1.0) {
                throw ContractError("k_shot sweep values must be positive integers");
            }
            c.dataset.k_shot = static_cast<int>(rounded);
        }
        std::ostringstream cell_name;
        cell_name << param << "_" << value;
        c.output_dir = (root / cell_name.str()).string();

        SweepCell cell;
        cell.value = value;
        cell.output_dir = c.output_dir;
        try {
            RunOutputs out = run_experiment(c, log);
            cell.final_metrics = out.final_metrics;
        } catch (const std::exception& ex) {
            cell.failed = true;
            cell.error = ex.what();
            if (log) *log << "sweep cell " << param << "=" << value << " failed: " << ex.what()
                          << "\n";
        }
        result.cells.push_back(std::move(cell));
    }

    result.summary_csv = (root / "sweep_summary.csv").string();
    std::ofstream summary(result.summary_csv);
    if (!summary) throw std::runtime_error("cannot write " + result.summary_csv);
    summary << param << ",status,target_test_accuracy,unlabeled_accuracy,d_hat_max\n";
    for (const SweepCell& cell : result.cells) {
        if (cell.failed) {
            summary << fmt(cell.value) << ",failed,nan,nan,nan\n";
        } else {
            summary << fmt(cell.value) << ",ok," << fmt(cell.final_metrics.target_test_accuracy)
                    << "," << fmt(cell.final_metrics.unlabeled_accuracy) << ","
                    << fmt(cell.final_metrics.d_hat_max) << "\n";
        }
    }
    return result;
}

}  // namespace uoda

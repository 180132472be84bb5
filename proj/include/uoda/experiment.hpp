#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "uoda/config.hpp"
#include "uoda/training.hpp"

namespace uoda {

struct RunOutputs {
    std::string metrics_csv;
    std::string divergence_json;
    std::string checkpoint;
    std::string manifest;
    std::vector<std::string> snapshots;
    MetricRow final_metrics;
    BoundReport final_bound;
};

// metrics.csv column order is a stability contract.
extern const char* const kMetricsHeader;

std::string metrics_row_csv(const MetricRow& row);

// Executes one experiment: trains per config, writes metrics.csv,
// snapshots/*.csv, divergence.json, checkpoint.json and manifest.json under
// config.output_dir.
RunOutputs run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// A manifest embeds the fully resolved config; feeding it back to `run`
// reproduces the run.
std::string manifest_json_text(const ExperimentConfig& config, const RunOutputs& outputs,
                               long long duration_ms);
ExperimentConfig config_from_manifest_file(const std::string& path);

// Run or manifest file: dispatches on content.
ExperimentConfig load_run_input(const std::string& path);

struct SweepCell {
    double value = 0.0;
    bool failed = false;
    std::string error;
    MetricRow final_metrics;
    std::string output_dir;
};

struct SweepResult {
    std::string param;
    std::vector<SweepCell> cells;
    std::string summary_csv;
};

// One run per value with a shared seed; failed cells are recorded and the
// sweep continues. param is one of alpha, beta, lambda, k_shot.
SweepResult sweep(const ExperimentConfig& base, const std::string& param,
                  const std::vector<double>& values, std::ostream* log = nullptr);

}  // namespace uoda

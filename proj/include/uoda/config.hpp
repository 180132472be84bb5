#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uoda/data.hpp"
#include "uoda/losses.hpp"

namespace uoda {

enum class Method { Uoda, SPlusT, EntOnly };

std::string method_name(Method m);

enum class DatasetKind { TwoMoons, GaussianShift, Csv };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::TwoMoons;
    // two_moons
    int n_per_domain = 500;
    double rotation_deg = 30.0;
    double noise_sd = 0.1;
    // gaussian_shift
    int classes = 2;
    int dim = 2;
    int n_per_class = 250;
    std::vector<double> mean_shift = {1.5, 0.0};
    // csv
    std::string csv_path;
    // split
    int k_shot = 3;
    double test_fraction = 0.5;
};

struct ModelConfig {
    std::vector<int> hidden = {32};
    int feature_dim = 2;
    std::vector<int> head_hidden;
};

struct ExperimentConfig {
    Method method = Method::Uoda;
    DatasetConfig dataset;
    ModelConfig model;
    HyperParams hp;
    std::uint64_t seed = 7;
    std::string output_dir = "run";
    int metric_every = 1;
    int snapshot_every = 0;

    void validate() const;  // includes the method-preset coefficient rules
};

// Flat "key = value" file with [section] headers; '#' or ';' comments.
// Unknown sections/keys and preset violations fail with the line number.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Every field, including defaulted ones; parse_config_text(to_ini(c)) == c.
std::string to_ini(const ExperimentConfig& config);

// Builds S/T/U/test from the dataset section (split seeded from config.seed).
SsdaDataset build_dataset(const ExperimentConfig& config);

}  // namespace uoda

#pragma once

#include <string>
#include <vector>

#include "uoda/data.hpp"
#include "uoda/model.hpp"

namespace uoda {

// Empirical domain-divergence estimate from the entropy-threshold rule:
// a sample is flagged when its prediction entropy is >= gamma (ties count),
// and d_hat(gamma) = 2 * (frac_tar - frac_src). Head 1 scores the source
// samples, head 2 the unlabeled target samples. d_hat can be negative early
// in training; it is reported as-is.
struct DivergenceReport {
    std::vector<double> gamma_grid;
    std::vector<double> frac_src;
    std::vector<double> frac_tar;
    std::vector<double> d_hat;
    double d_hat_max = 0.0;
};

struct BoundReport {
    double empirical_source_risk = 0.0;  // head-1 error rate on S
    double d_hat_max = 0.0;              // raw, as estimated
    // R_S + max(0, d_hat_max)/2; a negative divergence estimate means the
    // estimator's sign assumption failed, so it cannot tighten the bound.
    double bound_partial = 0.0;
    std::string delta = "unknown";
};

struct SnapshotRow {
    std::vector<double> feature;
    std::string domain;  // source | target_labeled | target_unlabeled
    int label = -1;      // -1 for unlabeled
    int pred1 = 0;
    int pred2 = 0;
};

struct FeatureSnapshot {
    int epoch = 0;
    int feature_dim = 0;
    std::vector<SnapshotRow> rows;
};

// Fraction of examples whose argmax prediction ties are broken toward the
// lowest class index.
double accuracy(const UodaModel& m, int head, const std::vector<LabeledExample>& examples);
double accuracy(const UodaModel& m, int head, const Tensor& x, const std::vector<int>& labels);

int argmax_row(const Tensor& t, std::size_t row);
std::vector<double> per_sample_entropy(const Tensor& log_probs);

// count evenly spaced thresholds strictly inside (0, ln K).
std::vector<double> default_gamma_grid(int K, int count = 20);

// Pure counting layer; the model-facing estimator delegates here.
DivergenceReport divergence_from_entropies(const std::vector<double>& src_entropy,
                                           const std::vector<double>& tar_entropy,
                                           const std::vector<double>& gamma_grid, int K);

DivergenceReport estimate_divergence(const UodaModel& m, const std::vector<LabeledExample>& source,
                                     const std::vector<std::vector<double>>& unlabeled,
                                     const std::vector<double>& gamma_grid);

BoundReport bound_report(const UodaModel& m, const std::vector<LabeledExample>& source,
                         const std::vector<std::vector<double>>& unlabeled,
                         const std::vector<double>& gamma_grid);

FeatureSnapshot snapshot_features(const UodaModel& m, const SsdaDataset& dataset, int epoch);

void write_snapshot_csv(const FeatureSnapshot& snapshot, const std::string& path);
FeatureSnapshot read_snapshot_csv(const std::string& path);
void write_divergence_json(const DivergenceReport& report, const std::string& path);

}  // namespace uoda

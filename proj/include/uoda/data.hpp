#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uoda/tensor.hpp"

namespace uoda {

struct LabeledExample {
    std::vector<double> x;
    int y = 0;
};

struct LabeledPool {
    std::vector<LabeledExample> examples;
    int num_classes = 0;
    int input_dim = 0;
};

struct DomainPair {
    LabeledPool source;
    LabeledPool target;
};

// S (labeled source), T (k labeled target examples per class), U (unlabeled
// target features), and a held-out target test set. U's ground-truth labels
// are sealed behind an evaluation-only accessor; no training-path structure
// carries them.
class SsdaDataset {
public:
    SsdaDataset(std::vector<LabeledExample> source, std::vector<LabeledExample> target_labeled,
                std::vector<std::vector<double>> target_unlabeled,
                std::vector<int> unlabeled_eval_labels, std::vector<LabeledExample> target_test,
                int num_classes, int input_dim);

    const std::vector<LabeledExample>& source() const { return source_; }
    const std::vector<LabeledExample>& target_labeled() const { return target_labeled_; }
    const std::vector<std::vector<double>>& target_unlabeled() const { return target_unlabeled_; }
    const std::vector<LabeledExample>& target_test() const { return target_test_; }
    int num_classes() const { return num_classes_; }
    int input_dim() const { return input_dim_; }

    // Ground truth of U, for diagnostics and reporting only.
    const std::vector<int>& unlabeled_labels_for_eval() const { return unlabeled_eval_labels_; }

private:
    std::vector<LabeledExample> source_;
    std::vector<LabeledExample> target_labeled_;
    std::vector<std::vector<double>> target_unlabeled_;
    std::vector<int> unlabeled_eval_labels_;
    std::vector<LabeledExample> target_test_;
    int num_classes_;
    int input_dim_;
};

// Two interleaved half-circles centered so that the class-1 arc is the
// point reflection of the class-0 arc through the origin; the target domain
// is the same distribution rotated by rotation_deg about the origin.
DomainPair gen_two_moons_pair(int n_per_domain, double rotation_deg, double noise_sd,
                              std::uint64_t seed);

// K unit-covariance Gaussian blobs per domain; target means are the source
// means plus mean_shift. For D == 1 the source means are evenly spaced on
// [-3, 3]; otherwise they sit on a radius-3 circle in the first two dims.
DomainPair gen_gaussian_shift_pair(int K, int D, int n_per_class,
                                   const std::vector<double>& mean_shift, std::uint64_t seed);

// Exactly k labeled target examples per class, sampled uniformly without
// replacement; the rest of the target pool splits into test (test_fraction)
// and unlabeled U.
SsdaDataset split_kshot(const LabeledPool& source_pool, const LabeledPool& target_pool, int k,
                        double test_fraction, std::uint64_t seed);

struct CsvSchema {
    std::string label_col = "label";
    std::string domain_col = "domain";  // optional in the file
};

struct CsvLoadResult {
    DomainPair pair;                       // target empty when no domain column
    bool has_domain = false;
    std::vector<std::string> label_vocab;  // lexicographic; index = class id
    std::vector<std::string> feature_cols;
};

CsvLoadResult load_csv(const std::string& path, const CsvSchema& schema = {});

void export_pool_csv(const LabeledPool& pool, const std::string& domain, const std::string& path);

// Helpers shared by trainer and evaluation.
Tensor stack_features(const std::vector<LabeledExample>& examples);
Tensor stack_rows(const std::vector<std::vector<double>>& rows);
std::vector<int> labels_of(const std::vector<LabeledExample>& examples);

}  // namespace uoda

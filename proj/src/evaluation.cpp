#include "uoda/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace uoda {

int argmax_row(const Tensor& t, std::size_t row) {
    int best = 0;
    double best_v = t.at(row, 0);
    for (std::size_t j = 1; j < t.cols(); ++j) {
        if (t.at(row, j) > best_v) {
            best_v = t.at(row, j);
            best = static_cast<int>(j);
        }
    }
    return best;
}

double accuracy(const UodaModel& m, int head, const Tensor& x, const std::vector<int>& labels) {
    if (labels.empty()) throw ContractError("accuracy of an empty example list");
    Tensor lp = eval_class_log_probs(m, head, x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (argmax_row(lp, i) == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy(const UodaModel& m, int head, const std::vector<LabeledExample>& examples) {
    if (examples.empty()) throw ContractError("accuracy of an empty example list");
    return accuracy(m, head, stack_features(examples), labels_of(examples));
}

std::vector<double> per_sample_entropy(const Tensor& log_probs) {
    std::vector<double> out(log_probs.rows());
    for (std::size_t i = 0; i < log_probs.rows(); ++i) {
        double h = 0.0;
        for (std::size_t j = 0; j < log_probs.cols(); ++j) {
            double lp = log_probs.at(i, j);
            h -= std::exp(lp) * lp;
        }
        out[i] = h;
    }
    return out;
}

std::vector<double> default_gamma_grid(int K, int count) {
    if (K < 2) throw ContractError("gamma grid needs K >= 2");
    if (count < 1) throw ContractError("gamma grid needs at least one point");
    double ln_k = std::log(static_cast<double>(K));
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        grid[static_cast<std::size_t>(j)] = ln_k * (j + 1) / static_cast<double>(count + 1);
    }
    return grid;
}

DivergenceReport divergence_from_entropies(const std::vector<double>& src_entropy,
                                           const std::vector<double>& tar_entropy,
                                           const std::vector<double>& gamma_grid, int K) {
    if (gamma_grid.empty()) throw ContractError("gamma grid must be nonempty");
    if (src_entropy.empty() || tar_entropy.empty()) {
        throw ContractError("divergence estimate needs nonempty S and U");
    }
    double ln_k = std::log(static_cast<double>(K));
    for (double g : gamma_grid) {
        if (!(g > 0.0 && g < ln_k)) {
            throw ContractError("gamma " + std::to_string(g) + " outside (0, ln K)");
        }
    }

    DivergenceReport report;
    report.gamma_grid = gamma_grid;
    report.d_hat_max = -std::numeric_limits<double>::infinity();
    for (double gamma : gamma_grid) {
        std::size_t ns = 0, nt = 0;
        for (double h : src_entropy) ns += h >= gamma ? 1 : 0;
        for (double h : tar_entropy) nt += h >= gamma ? 1 : 0;
        double fs = static_cast<double>(ns) / static_cast<double>(src_entropy.size());
        double ft = static_cast<double>(nt) / static_cast<double>(tar_entropy.size());
        double d = 2.0 * (ft - fs);
        report.frac_src.push_back(fs);
        report.frac_tar.push_back(ft);
        report.d_hat.push_back(d);
        report.d_hat_max = std::max(report.d_hat_max, d);
    }
    return report;
}

DivergenceReport estimate_divergence(const UodaModel& m, const std::vector<LabeledExample>& source,
                                     const std::vector<std::vector<double>>& unlabeled,
                                     const std::vector<double>& gamma_grid) {
    if (source.empty() || unlabeled.empty()) {
        throw ContractError("divergence estimate needs nonempty S and U");
    }
    std::vector<double> src_h =
        per_sample_entropy(eval_class_log_probs(m, 1, stack_features(source)));
    std::vector<double> tar_h =
        per_sample_entropy(eval_class_log_probs(m, 2, stack_rows(unlabeled)));
    return divergence_from_entropies(src_h, tar_h, gamma_grid, m.num_classes);
}

BoundReport bound_report(const UodaModel& m, const std::vector<LabeledExample>& source,
                         const std::vector<std::vector<double>>& unlabeled,
                         const std::vector<double>& gamma_grid) {
    DivergenceReport div = estimate_divergence(m, source, unlabeled, gamma_grid);
    BoundReport bound;
    bound.empirical_source_risk = 1.0 - accuracy(m, 1, source);
    bound.d_hat_max = div.d_hat_max;
    bound.bound_partial = bound.empirical_source_risk + std::max(0.0, div.d_hat_max) / 2.0;
    return bound;
}

FeatureSnapshot snapshot_features(const UodaModel& m, const SsdaDataset& dataset, int epoch) {
    FeatureSnapshot snap;
    snap.epoch = epoch;
    snap.feature_dim = m.feature_dim;

    auto emit = [&](const Tensor& x, const std::string& domain, const std::vector<int>* labels) {
        Tensor f = eval_features(m, x);
        Tensor lp1 = eval_class_log_probs(m, 1, x);
        Tensor lp2 = eval_class_log_probs(m, 2, x);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            SnapshotRow row;
            row.feature.resize(f.cols());
            for (std::size_t j = 0; j < f.cols(); ++j) row.feature[j] = f.at(i, j);
            row.domain = domain;
            row.label = labels ? (*labels)[i] : -1;
            row.pred1 = argmax_row(lp1, i);
            row.pred2 = argmax_row(lp2, i);
            snap.rows.push_back(std::move(row));
        }
    };

    std::vector<int> ys = labels_of(dataset.source());
    emit(stack_features(dataset.source()), "source", &ys);
    if (!dataset.target_labeled().empty()) {
        std::vector<int> yt = labels_of(dataset.target_labeled());
        emit(stack_features(dataset.target_labeled()), "target_labeled", &yt);
    }
    if (!dataset.target_unlabeled().empty()) {
        emit(stack_rows(dataset.target_unlabeled()), "target_unlabeled", nullptr);
    }
    return snap;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_snapshot_csv(const FeatureSnapshot& snapshot, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write snapshot: " + path);
    for (int j = 0; j < snapshot.feature_dim; ++j) out << "f_" << j << ",";
    out << "domain,label,pred1,pred2,epoch\n";
    for (const SnapshotRow& row : snapshot.rows) {
        for (double v : row.feature) out << fmt_double(v) << ",";
        out << row.domain << "," << row.label << "," << row.pred1 << "," << row.pred2 << ","
            << snapshot.epoch << "\n";
    }
}

FeatureSnapshot read_snapshot_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open snapshot: " + path);
    std::string header;
    if (!std::getline(in, header)) throw ContractError(path + ": empty snapshot");

    std::vector<std::string> cols;
    {
        std::stringstream ss(header);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    int d = 0;
    while (d < static_cast<int>(cols.size()) && cols[static_cast<std::size_t>(d)] == "f_" + std::to_string(d)) ++d;
    if (d == 0 || static_cast<std::size_t>(d) + 5 != cols.size()) {
        throw ContractError(path + ": unrecognized snapshot header");
    }

    FeatureSnapshot snap;
    snap.feature_dim = d;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        SnapshotRow row;
        try {
            for (int j = 0; j < d; ++j) {
                std::getline(ss, field, ',');
                row.feature.push_back(std::stod(field));
            }
            std::getline(ss, row.domain, ',');
            std::getline(ss, field, ',');
            row.label = std::stoi(field);
            std::getline(ss, field, ',');
            row.pred1 = std::stoi(field);
            std::getline(ss, field, ',');
            row.pred2 = std::stoi(field);
            std::getline(ss, field, ',');
            snap.epoch = std::stoi(field);
        } catch (const std::exception&) {
            throw ContractError(path + ":" + std::to_string(line_no) + ": malformed snapshot row");
        }
        snap.rows.push_back(std::move(row));
    }
    return snap;
}

void write_divergence_json(const DivergenceReport& report, const std::string& path) {
    nlohmann::json j;
    j["gamma"] = report.gamma_grid;
    j["frac_src"] = report.frac_src;
    j["frac_tar"] = report.frac_tar;
    j["d_hat"] = report.d_hat;
    j["d_hat_max"] = report.d_hat_max;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write divergence report: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace uoda

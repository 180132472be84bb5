#include "uoda/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "uoda/rng.hpp"

namespace uoda {

namespace {

void validate_pool(const LabeledPool& pool, const char* name) {
    for (const LabeledExample& e : pool.examples) {
        if (static_cast<int>(e.x.size()) != pool.input_dim) {
            throw ContractError(std::string(name) + " pool has inconsistent feature width");
        }
        if (e.y < 0 || e.y >= pool.num_classes) {
            throw ContractError(std::string(name) + " pool label out of range");
        }
        for (double v : e.x) {
            if (!std::isfinite(v)) throw ContractError(std::string(name) + " pool non-finite feature");
        }
    }
}

}  // namespace

SsdaDataset::SsdaDataset(std::vector<LabeledExample> source,
                         std::vector<LabeledExample> target_labeled,
                         std::vector<std::vector<double>> target_unlabeled,
                         std::vector<int> unlabeled_eval_labels,
                         std::vector<LabeledExample> target_test, int num_classes, int input_dim)
    : source_(std::move(source)),
      target_labeled_(std::move(target_labeled)),
      target_unlabeled_(std::move(target_unlabeled)),
      unlabeled_eval_labels_(std::move(unlabeled_eval_labels)),
      target_test_(std::move(target_test)),
      num_classes_(num_classes),
      input_dim_(input_dim) {
    if (num_classes_ < 2) throw ContractError("dataset needs at least 2 classes");
    if (source_.empty()) throw ContractError("source set must be nonempty");
    if (unlabeled_eval_labels_.size() != target_unlabeled_.size()) {
        throw ContractError("sealed label table must match U");
    }
    if (!target_labeled_.empty()) {
        std::vector<int> per_class(static_cast<std::size_t>(num_classes_), 0);
        for (const LabeledExample& e : target_labeled_) per_class[static_cast<std::size_t>(e.y)]++;
        int k = per_class[0];
        for (int c = 0; c < num_classes_; ++c) {
            if (per_class[static_cast<std::size_t>(c)] != k) {
                throw ContractError("k-shot violation: class " + std::to_string(c) + " has " +
                                    std::to_string(per_class[static_cast<std::size_t>(c)]) +
                                    " labeled target examples, expected " + std::to_string(k));
            }
        }
        if (target_unlabeled_.size() < 5 * target_labeled_.size()) {
            throw ContractError("N_u must be >= 5*N_t (got N_u=" +
                                std::to_string(target_unlabeled_.size()) + ", N_t=" +
                                std::to_string(target_labeled_.size()) + ")");
        }
    }
    LabeledPool src{source_, num_classes_, input_dim_};
    validate_pool(src, "source");
    LabeledPool tl{target_labeled_, num_classes_, input_dim_};
    validate_pool(tl, "target_labeled");
    LabeledPool tt{target_test_, num_classes_, input_dim_};
    validate_pool(tt, "target_test");
    for (const auto& row : target_unlabeled_) {
        if (static_cast<int>(row.size()) != input_dim_) {
            throw ContractError("unlabeled pool has inconsistent feature width");
        }
    }
}

namespace {

LabeledPool sample_moons(int n, double noise_sd, std::mt19937_64& rng) {
    LabeledPool pool;
    pool.num_classes = 2;
    pool.input_dim = 2;
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    std::normal_distribution<double> noise(0.0, noise_sd);
    int n0 = n - n / 2;
    for (int i = 0; i < n; ++i) {
        double t = angle(rng);
        double cx = std::cos(t) - 0.5;
        double cy = std::sin(t) - 0.25;
        LabeledExample e;
        if (i < n0) {
            e.x = {cx, cy};
            e.y = 0;
        } else {
            e.x = {-cx, -cy};  // class-1 arc = reflection of class-0 arc through the origin
            e.y = 1;
        }
        if (noise_sd > 0.0) {
            e.x[0] += noise(rng);
            e.x[1] += noise(rng);
        }
        pool.examples.push_back(std::move(e));
    }
    return pool;
}

void rotate_pool(LabeledPool& pool, double degrees) {
    double rad = degrees * std::numbers::pi / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    for (LabeledExample& e : pool.examples) {
        double x = e.x[0], y = e.x[1];
        e.x[0] = c * x - s * y;
        e.x[1] = s * x + c * y;
    }
}

}  // namespace

DomainPair gen_two_moons_pair(int n_per_domain, double rotation_deg, double noise_sd,
                              std::uint64_t seed) {
    if (n_per_domain < 8) {
        throw ContractError("two moons needs n_per_domain >= 8, got " +
                            std::to_string(n_per_domain));
    }
    if (noise_sd < 0.0) throw ContractError("noise_sd must be >= 0");
    DomainPair pair;
    auto rng_s = substream(seed, "data/moons/source");
    auto rng_t = substream(seed, "data/moons/target");
    pair.source = sample_moons(n_per_domain, noise_sd, rng_s);
    pair.target = sample_moons(n_per_domain, noise_sd, rng_t);
    rotate_pool(pair.target, rotation_deg);
    return pair;
}

DomainPair gen_gaussian_shift_pair(int K, int D, int n_per_class,
                                   const std::vector<double>& mean_shift, std::uint64_t seed) {
    if (K < 2) throw ContractError("gaussian pair needs K >= 2");
    if (D < 1) throw ContractError("gaussian pair needs D >= 1");
    if (n_per_class < 1) throw ContractError("n_per_class must be >= 1");
    if (static_cast<int>(mean_shift.size()) != D) {
        throw ContractError("mean_shift has dim " + std::to_string(mean_shift.size()) +
                            ", expected " + std::to_string(D));
    }

    std::vector<std::vector<double>> means(static_cast<std::size_t>(K),
                                           std::vector<double>(static_cast<std::size_t>(D), 0.0));
    if (D == 1) {
        for (int k = 0; k < K; ++k) {
            means[static_cast<std::size_t>(k)][0] =
                K == 1 ? 0.0 : -3.0 + 6.0 * k / static_cast<double>(K - 1);
        }
    } else {
        for (int k = 0; k < K; ++k) {
            double theta = 2.0 * std::numbers::pi * k / static_cast<double>(K);
            means[static_cast<std::size_t>(k)][0] = 3.0 * std::cos(theta);
            means[static_cast<std::size_t>(k)][1] = 3.0 * std::sin(theta);
        }
    }

    auto sample_domain = [&](std::mt19937_64& rng, bool shifted) {
        LabeledPool pool;
        pool.num_classes = K;
        pool.input_dim = D;
        std::normal_distribution<double> unit(0.0, 1.0);
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < n_per_class; ++i) {
                LabeledExample e;
                e.y = k;
                e.x.resize(static_cast<std::size_t>(D));
                for (int d = 0; d < D; ++d) {
                    double m = means[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)];
                    if (shifted) m += mean_shift[static_cast<std::size_t>(d)];
                    e.x[static_cast<std::size_t>(d)] = m + unit(rng);
                }
                pool.examples.push_back(std::move(e));
            }
        }
        return pool;
    };

    DomainPair pair;
    auto rng_s = substream(seed, "data/gauss/source");
    auto rng_t = substream(seed, "data/gauss/target");
    pair.source = sample_domain(rng_s, false);
    pair.target = sample_domain(rng_t, true);
    return pair;
}

SsdaDataset split_kshot(const LabeledPool& source_pool, const LabeledPool& target_pool, int k,
                        double test_fraction, std::uint64_t seed) {
    if (k < 1) throw ContractError("k must be >= 1");
    if (test_fraction < 0.0 || test_fraction >= 1.0) {
        throw ContractError("test_fraction must lie in [0,1)");
    }
    if (source_pool.num_classes != target_pool.num_classes ||
        source_pool.input_dim != target_pool.input_dim) {
        throw ContractError("source and target pools disagree on classes or feature width");
    }
    int K = target_pool.num_classes;

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < target_pool.examples.size(); ++i) {
        by_class[static_cast<std::size_t>(target_pool.examples[i].y)].push_back(i);
    }
    for (int c = 0; c < K; ++c) {
        if (static_cast<int>(by_class[static_cast<std::size_t>(c)].size()) < k + 1) {
            throw ContractError("class " + std::to_string(c) + " has only " +
                                std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                                " target examples; k-shot split needs at least " +
                                std::to_string(k + 1));
        }
    }

    auto rng = substream(seed, "data/split");
    std::vector<char> is_labeled(target_pool.examples.size(), 0);
    std::vector<LabeledExample> target_labeled;
    for (int c = 0; c < K; ++c) {
        std::vector<std::size_t>& idx = by_class[static_cast<std::size_t>(c)];
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int j = 0; j < k; ++j) {
            is_labeled[idx[static_cast<std::size_t>(j)]] = 1;
            target_labeled.push_back(target_pool.examples[idx[static_cast<std::size_t>(j)]]);
        }
    }

    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < target_pool.examples.size(); ++i) {
        if (!is_labeled[i]) rest.push_back(i);
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(rest.size())));

    std::vector<LabeledExample> target_test;
    std::vector<std::vector<double>> unlabeled;
    std::vector<int> unlabeled_labels;
    for (std::size_t j = 0; j < rest.size(); ++j) {
        const LabeledExample& e = target_pool.examples[rest[j]];
        if (j < n_test) {
            target_test.push_back(e);
        } else {
            unlabeled.push_back(e.x);
            unlabeled_labels.push_back(e.y);
        }
    }

    return SsdaDataset(source_pool.examples, std::move(target_labeled), std::move(unlabeled),
                       std::move(unlabeled_labels), std::move(target_test), K,
                       target_pool.input_dim);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    for (std::string& f : fields) {
        auto b = f.find_first_not_of(" \t");
        auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    return fields;
}

}  // namespace

CsvLoadResult load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open CSV file: " + path);

    std::string header;
    if (!std::getline(in, header)) throw ContractError(path + ": empty dataset");
    std::vector<std::string> cols = split_csv_line(header);

    int label_idx = -1, domain_idx = -1;
    std::vector<int> feature_idx;
    CsvLoadResult result;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == schema.label_col) {
            label_idx = static_cast<int>(i);
        } else if (cols[i] == schema.domain_col) {
            domain_idx = static_cast<int>(i);
        } else {
            feature_idx.push_back(static_cast<int>(i));
            result.feature_cols.push_back(cols[i]);
        }
    }
    if (label_idx < 0) throw ContractError(path + ": missing label column '" + schema.label_col + "'");
    if (feature_idx.empty()) throw ContractError(path + ": no feature columns");
    result.has_domain = domain_idx >= 0;

    struct RawRow {
        std::vector<double> x;
        std::string label;
        bool target = false;
    };
    std::vector<RawRow> rows;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != cols.size()) {
            throw ContractError(path + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(cols.size()) + " fields, got " +
                                std::to_string(fields.size()));
        }
        RawRow row;
        for (std::size_t j = 0; j < feature_idx.size(); ++j) {
            const std::string& f = fields[static_cast<std::size_t>(feature_idx[j])];
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(f, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != f.size() || f.empty()) {
                throw ContractError(path + ":" + std::to_string(line_no) +
                                    ": non-numeric value in feature column '" +
                                    result.feature_cols[j] + "'");
            }
            row.x.push_back(v);
        }
        row.label = fields[static_cast<std::size_t>(label_idx)];
        if (domain_idx >= 0) {
            const std::string& d = fields[static_cast<std::size_t>(domain_idx)];
            if (d == "target") {
                row.target = true;
            } else if (d != "source") {
                throw ContractError(path + ":" + std::to_string(line_no) +
                                    ": domain must be 'source' or 'target', got '" + d + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ContractError(path + ": empty dataset");

    std::map<std::string, int> vocab;  // ordered => lexicographic class ids
    for (const RawRow& r : rows) vocab.emplace(r.label, 0);
    int next = 0;
    for (auto& [name, id] : vocab) {
        id = next++;
        result.label_vocab.push_back(name);
    }

    int K = next;
    int D = static_cast<int>(feature_idx.size());
    result.pair.source.num_classes = result.pair.target.num_classes = K;
    result.pair.source.input_dim = result.pair.target.input_dim = D;
    for (RawRow& r : rows) {
        LabeledExample e{std::move(r.x), vocab.at(r.label)};
        (r.target ? result.pair.target : result.pair.source).examples.push_back(std::move(e));
    }
    return result;
}

void export_pool_csv(const LabeledPool& pool, const std::string& domain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV: " + path);
    for (int d = 0; d < pool.input_dim; ++d) out << "f_" << d << ",";
    out << "label,domain\n";
    out.precision(17);
    for (const LabeledExample& e : pool.examples) {
        for (double v : e.x) out << v << ",";
        out << e.y << "," << domain << "\n";
    }
}

Tensor stack_features(const std::vector<LabeledExample>& examples) {
    if (examples.empty()) throw ContractError("cannot stack an empty example list");
    std::size_t d = examples[0].x.size();
    Tensor out = Tensor::zeros({examples.size(), d});
    for (std::size_t i = 0; i < examples.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = examples[i].x[j];
    }
    return out;
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ContractError("cannot stack an empty row list");
    std::size_t d = rows[0].size();
    Tensor out = Tensor::zeros({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) out.at(i, j) = rows[i][j];
    }
    return out;
}

std::vector<int> labels_of(const std::vector<LabeledExample>& examples) {
    std::vector<int> out;
    out.reserve(examples.size());
    for (const LabeledExample& e : examples) out.push_back(e.y);
    return out;
}

}  // namespace uoda

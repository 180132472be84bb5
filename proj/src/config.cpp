#include "uoda/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "uoda/rng.hpp"

namespace uoda {

std::string method_name(Method m) {
    switch (m) {
        case Method::Uoda: return "uoda";
        case Method::SPlusT: return "s_plus_t";
        case Method::EntOnly: return "ent_only";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    hp.validate();
    if (dataset.k_shot < 1) throw ConfigError(0, "dataset.k_shot must be >= 1");
    if (dataset.test_fraction < 0.0 || dataset.test_fraction >= 1.0) {
        throw ConfigError(0, "dataset.test_fraction must lie in [0,1)");
    }
    if (metric_every < 1) throw ConfigError(0, "experiment.metric_every must be >= 1");
    if (snapshot_every < 0) throw ConfigError(0, "experiment.snapshot_every must be >= 0");
    if (model.feature_dim < 1) throw ConfigError(0, "model.feature_dim must be >= 1");

    if (method == Method::SPlusT && (hp.beta != 0.0 || hp.lambda_ != 0.0)) {
        throw ConfigError(0, "method s_plus_t forces beta = 0 and lambda = 0");
    }
    if (method == Method::EntOnly) {
        if (hp.beta != 0.0) throw ConfigError(0, "method ent_only forces beta = 0");
        if (hp.lambda_ <= 0.0) throw ConfigError(0, "method ent_only requires lambda > 0");
        if (!hp.entropy_minimization_only) {
            throw ConfigError(0, "method ent_only implies plain entropy minimization");
        }
    }
    if (method != Method::EntOnly && hp.entropy_minimization_only) {
        throw ConfigError(0, "entropy minimization without the adversarial sign is the "
                             "ent_only preset");
    }
}

namespace {

struct IniEntry {
    std::string value;
    int line = 0;
    bool consumed = false;
};

struct Ini {
    std::map<std::string, IniEntry> entries;  // "section.key" -> value

    bool has(const std::string& key) const { return entries.count(key) > 0; }

    const IniEntry* find(const std::string& key) {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        it->second.consumed = true;
        return &it->second;
    }
};

Ini parse_ini(const std::string& text) {
    Ini ini;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);

        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError(line_no, "malformed section header");
            }
            section = line.substr(1, line.size() - 2);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(line_no, "expected 'key = value'");
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            auto bb = s.find_first_not_of(" \t");
            auto ee = s.find_last_not_of(" \t");
            s = bb == std::string::npos ? std::string() : s.substr(bb, ee - bb + 1);
        };
        trim(key);
        trim(value);
        if (key.empty()) throw ConfigError(line_no, "empty key");
        if (section.empty()) throw ConfigError(line_no, "key outside any [section]");
        std::string full = section + "." + key;
        if (ini.entries.count(full)) {
            throw ConfigError(line_no, "duplicate key '" + full + "'");
        }
        ini.entries[full] = {value, line_no, false};
    }
    return ini;
}

class Reader {
public:
    explicit Reader(Ini& ini) : ini_(ini) {}

    template <typename F>
    void opt(const std::string& key, F&& apply) {
        const IniEntry* e = ini_.find(key);
        if (!e) return;
        try {
            apply(e->value);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError(e->line, key + ": " + ex.what());
        }
    }

    void check_all_consumed() const {
        for (const auto& [key, entry] : ini_.entries) {
            if (!entry.consumed) {
                throw ConfigError(entry.line, "unknown key '" + key + "'");
            }
        }
    }

private:
    Ini& ini_;
};

double parse_double(const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::runtime_error("not a number: '" + s + "'");
    return v;
}

long long parse_int(const std::string& s) {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::runtime_error("not an integer: '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::runtime_error("not a boolean: '" + s + "'");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto b = tok.find_first_not_of(" \t");
        auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) throw std::runtime_error("empty list element");
        out.push_back(static_cast<int>(parse_int(tok.substr(b, e - b + 1))));
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto b = tok.find_first_not_of(" \t");
        auto e = tok.find_last_not_of(" \t");
        if (b == std::string::npos) throw std::runtime_error("empty list element");
        out.push_back(parse_double(tok.substr(b, e - b + 1)));
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    Ini ini = parse_ini(text);
    Reader r(ini);
    ExperimentConfig c;

    r.opt("experiment.method", [&](const std::string& v) {
        if (v == "uoda") {
            c.method = Method::Uoda;
        } else if (v == "s_plus_t") {
            c.method = Method::SPlusT;
            c.hp.beta = 0.0;
            c.hp.lambda_ = 0.0;
        } else if (v == "ent_only") {
            c.method = Method::EntOnly;
            c.hp.beta = 0.0;
            c.hp.entropy_minimization_only = true;
        } else {
            throw std::runtime_error("unknown method '" + v + "'");
        }
    });
    r.opt("experiment.seed",
          [&](const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int(v)); });
    r.opt("experiment.output_dir", [&](const std::string& v) { c.output_dir = v; });
    r.opt("experiment.metric_every",
          [&](const std::string& v) { c.metric_every = static_cast<int>(parse_int(v)); });
    r.opt("experiment.snapshot_every",
          [&](const std::string& v) { c.snapshot_every = static_cast<int>(parse_int(v)); });

    r.opt("dataset.generator", [&](const std::string& v) {
        if (v == "two_moons") {
            c.dataset.kind = DatasetKind::TwoMoons;
        } else if (v == "gaussian_shift") {
            c.dataset.kind = DatasetKind::GaussianShift;
        } else if (v == "csv") {
            c.dataset.kind = DatasetKind::Csv;
        } else {
            throw std::runtime_error("unknown generator '" + v + "'");
        }
    });
    r.opt("dataset.n_per_domain",
          [&](const std::string& v) { c.dataset.n_per_domain = static_cast<int>(parse_int(v)); });
    r.opt("dataset.rotation_deg",
          [&](const std::string& v) { c.dataset.rotation_deg = parse_double(v); });
    r.opt("dataset.noise_sd", [&](const std::string& v) { c.dataset.noise_sd = parse_double(v); });
    r.opt("dataset.classes",
          [&](const std::string& v) { c.dataset.classes = static_cast<int>(parse_int(v)); });
    r.opt("dataset.dim", [&](const std::string& v) { c.dataset.dim = static_cast<int>(parse_int(v)); });
    r.opt("dataset.n_per_class",
          [&](const std::string& v) { c.dataset.n_per_class = static_cast<int>(parse_int(v)); });
    r.opt("dataset.mean_shift",
          [&](const std::string& v) { c.dataset.mean_shift = parse_double_list(v); });
    r.opt("dataset.csv_path", [&](const std::string& v) { c.dataset.csv_path = v; });
    r.opt("dataset.k_shot",
          [&](const std::string& v) { c.dataset.k_shot = static_cast<int>(parse_int(v)); });
    r.opt("dataset.test_fraction",
          [&](const std::string& v) { c.dataset.test_fraction = parse_double(v); });

    r.opt("model.hidden", [&](const std::string& v) { c.model.hidden = parse_int_list(v); });
    r.opt("model.feature_dim",
          [&](const std::string& v) { c.model.feature_dim = static_cast<int>(parse_int(v)); });
    r.opt("model.head_hidden",
          [&](const std::string& v) { c.model.head_hidden = parse_int_list(v); });

    r.opt("hyperparams.alpha", [&](const std::string& v) { c.hp.alpha = parse_double(v); });
    r.opt("hyperparams.beta", [&](const std::string& v) { c.hp.beta = parse_double(v); });
    r.opt("hyperparams.lambda", [&](const std::string& v) { c.hp.lambda_ = parse_double(v); });
    r.opt("hyperparams.lr", [&](const std::string& v) { c.hp.lr = parse_double(v); });
    r.opt("hyperparams.momentum", [&](const std::string& v) { c.hp.momentum = parse_double(v); });
    r.opt("hyperparams.weight_decay",
          [&](const std::string& v) { c.hp.weight_decay = parse_double(v); });
    r.opt("hyperparams.epochs",
          [&](const std::string& v) { c.hp.epochs = static_cast<int>(parse_int(v)); });
    r.opt("hyperparams.batch_s",
          [&](const std::string& v) { c.hp.batch_s = static_cast<int>(parse_int(v)); });
    r.opt("hyperparams.batch_t",
          [&](const std::string& v) { c.hp.batch_t = static_cast<int>(parse_int(v)); });
    r.opt("hyperparams.batch_u",
          [&](const std::string& v) { c.hp.batch_u = static_cast<int>(parse_int(v)); });
    r.opt("hyperparams.iterations_per_epoch", [&](const std::string& v) {
        c.hp.iterations_per_epoch = static_cast<int>(parse_int(v));
    });
    r.opt("hyperparams.mode", [&](const std::string& v) {
        if (v == "ssda") {
            c.hp.mode = TrainMode::SSDA;
        } else if (v == "uda") {
            c.hp.mode = TrainMode::UDA;
        } else {
            throw std::runtime_error("mode must be 'ssda' or 'uda'");
        }
    });
    r.opt("hyperparams.generator_supervision", [&](const std::string& v) {
        if (v == "per_head") {
            c.hp.generator_supervision = GeneratorSupervision::PerHead;
        } else if (v == "all_heads") {
            c.hp.generator_supervision = GeneratorSupervision::AllHeads;
        } else {
            throw std::runtime_error("generator_supervision must be 'per_head' or 'all_heads'");
        }
    });

    bool self_train_enabled = false;
    bool start_epoch_set = false;
    SelfTrainParams st;
    r.opt("self_train.enabled", [&](const std::string& v) { self_train_enabled = parse_bool(v); });
    r.opt("self_train.start_epoch", [&](const std::string& v) {
        st.start_epoch = static_cast<int>(parse_int(v));
        start_epoch_set = true;
    });
    r.opt("self_train.confidence_tau",
          [&](const std::string& v) { st.confidence_tau = parse_double(v); });
    r.opt("self_train.require_agreement",
          [&](const std::string& v) { st.require_agreement = parse_bool(v); });
    if (self_train_enabled) {
        if (!start_epoch_set) st.start_epoch = c.hp.epochs / 2;
        c.hp.self_train = st;
    }

    r.check_all_consumed();
    try {
        c.validate();
    } catch (const ContractError& ex) {
        throw ConfigError(0, ex.what());
    }
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string to_ini(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "[experiment]\n";
    out << "method = " << method_name(c.method) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "output_dir = " << c.output_dir << "\n";
    out << "metric_every = " << c.metric_every << "\n";
    out << "snapshot_every = " << c.snapshot_every << "\n\n";

    out << "[dataset]\n";
    switch (c.dataset.kind) {
        case DatasetKind::TwoMoons:
            out << "generator = two_moons\n";
            out << "n_per_domain = " << c.dataset.n_per_domain << "\n";
            out << "rotation_deg = " << fmt(c.dataset.rotation_deg) << "\n";
            out << "noise_sd = " << fmt(c.dataset.noise_sd) << "\n";
            break;
        case DatasetKind::GaussianShift: {
            out << "generator = gaussian_shift\n";
            out << "classes = " << c.dataset.classes << "\n";
            out << "dim = " << c.dataset.dim << "\n";
            out << "n_per_class = " << c.dataset.n_per_class << "\n";
            out << "mean_shift = ";
            for (std::size_t i = 0; i < c.dataset.mean_shift.size(); ++i) {
                if (i) out << ",";
                out << fmt(c.dataset.mean_shift[i]);
            }
            out << "\n";
            break;
        }
        case DatasetKind::Csv:
            out << "generator = csv\n";
            out << "csv_path = " << c.dataset.csv_path << "\n";
            break;
    }
    out << "k_shot = " << c.dataset.k_shot << "\n";
    out << "test_fraction = " << fmt(c.dataset.test_fraction) << "\n\n";

    out << "[model]\n";
    out << "hidden = ";
    for (std::size_t i = 0; i < c.model.hidden.size(); ++i) {
        if (i) out << ",";
        out << c.model.hidden[i];
    }
    out << "\n";
    out << "feature_dim = " << c.model.feature_dim << "\n";
    if (!c.model.head_hidden.empty()) {
        out << "head_hidden = ";
        for (std::size_t i = 0; i < c.model.head_hidden.size(); ++i) {
            if (i) out << ",";
            out << c.model.head_hidden[i];
        }
        out << "\n";
    }
    out << "\n[hyperparams]\n";
    out << "alpha = " << fmt(c.hp.alpha) << "\n";
    out << "beta = " << fmt(c.hp.beta) << "\n";
    out << "lambda = " << fmt(c.hp.lambda_) << "\n";
    out << "lr = " << fmt(c.hp.lr) << "\n";
    out << "momentum = " << fmt(c.hp.momentum) << "\n";
    out << "weight_decay = " << fmt(c.hp.weight_decay) << "\n";
    out << "epochs = " << c.hp.epochs << "\n";
    out << "batch_s = " << c.hp.batch_s << "\n";
    out << "batch_t = " << c.hp.batch_t << "\n";
    out << "batch_u = " << c.hp.batch_u << "\n";
    out << "iterations_per_epoch = " << c.hp.iterations_per_epoch << "\n";
    out << "mode = " << (c.hp.mode == TrainMode::SSDA ? "ssda" : "uda") << "\n";
    out << "generator_supervision = "
        << (c.hp.generator_supervision == GeneratorSupervision::PerHead ? "per_head" : "all_heads")
        << "\n";

    if (c.hp.self_train) {
        out << "\n[self_train]\n";
        out << "enabled = true\n";
        out << "start_epoch = " << c.hp.self_train->start_epoch << "\n";
        out << "confidence_tau = " << fmt(c.hp.self_train->confidence_tau) << "\n";
        out << "require_agreement = " << (c.hp.self_train->require_agreement ? "true" : "false")
            << "\n";
    }
    return out.str();
}

SsdaDataset build_dataset(const ExperimentConfig& c) {
    DomainPair pair;
    switch (c.dataset.kind) {
        case DatasetKind::TwoMoons:
            pair = gen_two_moons_pair(c.dataset.n_per_domain, c.dataset.rotation_deg,
                                      c.dataset.noise_sd, substream_seed(c.seed, "data"));
            break;
        case DatasetKind::GaussianShift:
            pair = gen_gaussian_shift_pair(c.dataset.classes, c.dataset.dim, c.dataset.n_per_class,
                                           c.dataset.mean_shift, substream_seed(c.seed, "data"));
            break;
        case DatasetKind::Csv: {
            CsvLoadResult loaded = load_csv(c.dataset.csv_path);
            if (!loaded.has_domain || loaded.pair.target.examples.empty()) {
                throw ContractError(c.dataset.csv_path +
                                    ": CSV dataset needs a domain column with target rows");
            }
            pair = std::move(loaded.pair);
            break;
        }
    }
    return split_kshot(pair.source, pair.target, c.dataset.k_shot, c.dataset.test_fraction,
                       substream_seed(c.seed, "split"));
}

}  // namespace uoda

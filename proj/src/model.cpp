#include "uoda/model.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "uoda/rng.hpp"

namespace uoda {

void MlpSpec::validate() const {
    if (layer_widths.size() < 2) {
        throw ContractError("MlpSpec needs at least input and output widths");
    }
    for (int w : layer_widths) {
        if (w < 1) throw ContractError("MlpSpec width must be >= 1, got " + std::to_string(w));
    }
}

namespace {

MlpParams init_mlp(const MlpSpec& spec, std::mt19937_64& rng) {
    MlpParams p;
    for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
        auto fan_in = static_cast<std::size_t>(spec.layer_widths[l]);
        auto fan_out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
        double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-s, s);
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (std::size_t i = 0; i < w.numel(); ++i) w.at(i) = dist(rng);
        p.layers.push_back({std::move(w), Tensor::zeros({fan_out})});
    }
    return p;
}

}  // namespace

UodaModel init_model(int input_dim, const std::vector<int>& hidden, int feature_dim, int K,
                     std::uint64_t seed, const std::vector<int>& head_hidden) {
    if (input_dim < 1 || feature_dim < 1) throw ContractError("model dims must be >= 1");
    if (K < 2) throw ContractError("num_classes must be >= 2, got " + std::to_string(K));

    UodaModel m;
    m.input_dim = input_dim;
    m.feature_dim = feature_dim;
    m.num_classes = K;

    m.generator_spec.layer_widths.push_back(input_dim);
    for (int w : hidden) m.generator_spec.layer_widths.push_back(w);
    m.generator_spec.layer_widths.push_back(feature_dim);
    m.generator_spec.validate();

    m.head_spec.layer_widths.push_back(feature_dim);
    for (int w : head_hidden) m.head_spec.layer_widths.push_back(w);
    m.head_spec.layer_widths.push_back(K);
    m.head_spec.validate();

    auto rng_g = substream(seed, "init/generator");
    auto rng_f1 = substream(seed, "init/classifier1");
    auto rng_f2 = substream(seed, "init/classifier2");
    m.generator = init_mlp(m.generator_spec, rng_g);
    m.classifier1 = init_mlp(m.head_spec, rng_f1);
    m.classifier2 = init_mlp(m.head_spec, rng_f2);
    return m;
}

std::vector<NodeId> BoundMlp::all() const {
    std::vector<NodeId> ids;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        ids.push_back(weights[l]);
        ids.push_back(biases[l]);
    }
    return ids;
}

BoundMlp bind_mlp(Graph& g, const MlpParams& params, bool trainable) {
    BoundMlp bound;
    for (const LayerParams& layer : params.layers) {
        if (trainable) {
            bound.weights.push_back(g.parameter(layer.weight));
            bound.biases.push_back(g.parameter(layer.bias));
        } else {
            bound.weights.push_back(g.input(layer.weight));
            bound.biases.push_back(g.input(layer.bias));
        }
    }
    return bound;
}

NodeId mlp_apply(Graph& g, const BoundMlp& bound, NodeId x) {
    NodeId h = x;
    for (std::size_t l = 0; l < bound.weights.size(); ++l) {
        h = g.bias_add(g.matmul(h, bound.weights[l]), bound.biases[l]);
        if (l + 1 < bound.weights.size()) h = g.relu(h);
    }
    return h;
}

NodeId features(Graph& g, const BoundMlp& generator, NodeId x) {
    return mlp_apply(g, generator, x);
}

NodeId class_log_probs(Graph& g, const UodaModel& m, const BoundMlp& head_params, int head,
                       NodeId feats) {
    if (head != 1 && head != 2) {
        throw ContractError("head must be 1 or 2, got " + std::to_string(head));
    }
    (void)m;
    return g.log_softmax(mlp_apply(g, head_params, feats));
}

Tensor eval_features(const UodaModel& m, const Tensor& x) {
    if (x.shape().size() != 2 || x.cols() != static_cast<std::size_t>(m.input_dim)) {
        throw ShapeError("batch shape " + shape_to_string(x.shape()) + " does not match input_dim " +
                         std::to_string(m.input_dim));
    }
    Graph g;
    NodeId xs = g.input(x);
    BoundMlp gen = bind_mlp(g, m.generator, false);
    return g.value(features(g, gen, xs));
}

Tensor eval_class_log_probs(const UodaModel& m, int head, const Tensor& x) {
    if (head != 1 && head != 2) {
        throw ContractError("head must be 1 or 2, got " + std::to_string(head));
    }
    Graph g;
    NodeId xs = g.input(x);
    BoundMlp gen = bind_mlp(g, m.generator, false);
    NodeId f = features(g, gen, xs);
    const MlpParams& head_params = head == 1 ? m.classifier1 : m.classifier2;
    BoundMlp h = bind_mlp(g, head_params, false);
    return g.value(class_log_probs(g, m, h, head, f));
}

std::vector<Tensor*> group_tensors(MlpParams& p) {
    std::vector<Tensor*> out;
    for (LayerParams& layer : p.layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

std::vector<const Tensor*> group_tensors(const MlpParams& p) {
    std::vector<const Tensor*> out;
    for (const LayerParams& layer : p.layers) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    return out;
}

namespace {

using nlohmann::json;

json mlp_to_json(const MlpSpec& spec, const MlpParams& params) {
    json j;
    j["widths"] = spec.layer_widths;
    json layers = json::array();
    for (const LayerParams& layer : params.layers) {
        json l;
        l["weight"] = layer.weight.data();
        l["bias"] = layer.bias.data();
        layers.push_back(std::move(l));
    }
    j["layers"] = std::move(layers);
    return j;
}

void mlp_from_json(const json& j, MlpSpec& spec, MlpParams& params) {
    spec.layer_widths = j.at("widths").get<std::vector<int>>();
    spec.validate();
    params.layers.clear();
    const json& layers = j.at("layers");
    if (layers.size() + 1 != spec.layer_widths.size()) {
        throw ContractError("checkpoint layer count does not match widths");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto fan_in = static_cast<std::size_t>(spec.layer_widths[l]);
        auto fan_out = static_cast<std::size_t>(spec.layer_widths[l + 1]);
        LayerParams layer{
            Tensor({fan_in, fan_out}, layers[l].at("weight").get<std::vector<double>>()),
            Tensor({fan_out}, layers[l].at("bias").get<std::vector<double>>())};
        params.layers.push_back(std::move(layer));
    }
}

}  // namespace

void save_checkpoint(const UodaModel& m, const std::string& path) {
    json j;
    j["format_version"] = 1;
    j["input_dim"] = m.input_dim;
    j["feature_dim"] = m.feature_dim;
    j["num_classes"] = m.num_classes;
    j["generator"] = mlp_to_json(m.generator_spec, m.generator);
    j["classifier1"] = mlp_to_json(m.head_spec, m.classifier1);
    j["classifier2"] = mlp_to_json(m.head_spec, m.classifier2);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

UodaModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    json j = json::parse(in);
    if (j.at("format_version").get<int>() != 1) {
        throw std::runtime_error("unsupported checkpoint format_version");
    }
    UodaModel m;
    m.input_dim = j.at("input_dim").get<int>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.num_classes = j.at("num_classes").get<int>();
    mlp_from_json(j.at("generator"), m.generator_spec, m.generator);
    MlpSpec spec1, spec2;
    mlp_from_json(j.at("classifier1"), spec1, m.classifier1);
    mlp_from_json(j.at("classifier2"), spec2, m.classifier2);
    if (spec1.layer_widths != spec2.layer_widths) {
        throw ContractError("checkpoint head shapes disagree");
    }
    m.head_spec = spec1;
    return m;
}

}  // namespace uoda

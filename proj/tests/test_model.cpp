#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "uoda/model.hpp"

using namespace uoda;
using uoda::testing::finite_difference_grads;
using uoda::testing::max_rel_error;

namespace {

bool same_params(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weight.data() != b.layers[l].weight.data()) return false;
        if (a.layers[l].bias.data() != b.layers[l].bias.data()) return false;
    }
    return true;
}

Tensor random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    Tensor t = Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("init is deterministic per seed and heads are disjoint") {
    UodaModel a = init_model(2, {8}, 2, 3, 17);
    UodaModel b = init_model(2, {8}, 2, 3, 17);
    CHECK(same_params(a.generator, b.generator));
    CHECK(same_params(a.classifier1, b.classifier1));
    CHECK(same_params(a.classifier2, b.classifier2));

    UodaModel c = init_model(2, {8}, 2, 3, 18);
    CHECK_FALSE(same_params(a.generator, c.generator));

    // two heads of one model come from independent substreams
    CHECK_FALSE(same_params(a.classifier1, a.classifier2));
}

TEST_CASE("shapes: feature_dim=2, K=3 head is 2x3 plus bias 3") {
    UodaModel m = init_model(4, {8}, 2, 3, 1);
    REQUIRE(m.classifier1.layers.size() == 1);
    CHECK(m.classifier1.layers[0].weight.shape() == Shape{2, 3});
    CHECK(m.classifier1.layers[0].bias.shape() == Shape{3});
    CHECK(m.generator.layers.back().weight.shape() == Shape{8, 2});
}

TEST_CASE("invalid dims are rejected") {
    CHECK_THROWS_AS(init_model(0, {8}, 2, 2, 1), ContractError);
    CHECK_THROWS_AS(init_model(2, {8}, 2, 1, 1), ContractError);
    CHECK_THROWS_AS(init_model(2, {0}, 2, 2, 1), ContractError);
}

TEST_CASE("glorot bounds hold per layer") {
    UodaModel m = init_model(3, {16}, 2, 2, 5);
    double s0 = std::sqrt(6.0 / (3 + 16));
    for (std::size_t i = 0; i < m.generator.layers[0].weight.numel(); ++i) {
        CHECK(std::abs(m.generator.layers[0].weight.at(i)) <= s0);
    }
    for (std::size_t i = 0; i < m.generator.layers[0].bias.numel(); ++i) {
        CHECK(m.generator.layers[0].bias.at(i) == 0.0);
    }
}

TEST_CASE("zero weights produce zero features and uniform heads") {
    UodaModel m = init_model(3, {4}, 2, 4, 9);
    for (auto* t : group_tensors(m.generator)) t->fill(0.0);
    Tensor x = random_batch(5, 3, 11);
    Tensor f = eval_features(m, x);
    for (std::size_t i = 0; i < f.numel(); ++i) CHECK(f.at(i) == 0.0);

    for (auto* t : group_tensors(m.classifier1)) t->fill(0.0);
    Tensor lp = eval_class_log_probs(m, 1, x);
    double expect = std::log(1.0 / 4.0);
    for (std::size_t i = 0; i < lp.numel(); ++i) {
        CHECK(lp.at(i) == doctest::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("rowwise independence: single-row batch equals the matching row") {
    UodaModel m = init_model(3, {6}, 2, 2, 33);
    Tensor batch = random_batch(7, 3, 4);
    Tensor full = eval_features(m, batch);
    for (std::size_t r = 0; r < 7; ++r) {
        Tensor one = Tensor::zeros({1, 3});
        for (std::size_t j = 0; j < 3; ++j) one.at(0, j) = batch.at(r, j);
        Tensor row = eval_features(m, one);
        for (std::size_t j = 0; j < row.cols(); ++j) CHECK(row.at(0, j) == full.at(r, j));
    }
}

TEST_CASE("batch permutation equivariance") {
    UodaModel m = init_model(3, {6}, 2, 3, 21);
    Tensor batch = random_batch(6, 3, 10);
    std::vector<std::size_t> perm = {4, 0, 5, 2, 1, 3};
    Tensor permuted = Tensor::zeros({6, 3});
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 3; ++j) permuted.at(i, j) = batch.at(perm[i], j);
    }
    Tensor lp = eval_class_log_probs(m, 2, batch);
    Tensor lp_perm = eval_class_log_probs(m, 2, permuted);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < lp.cols(); ++j) {
            CHECK(lp_perm.at(i, j) == lp.at(perm[i], j));
        }
    }
}

TEST_CASE("head rows exponentiate to a probability simplex") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        std::uniform_int_distribution<int> kdist(2, 5);
        int k = kdist(rng);
        UodaModel m = init_model(2, {5}, 2, k, rng());
        Tensor x = random_batch(4, 2, rng());
        for (int head : {1, 2}) {
            Tensor lp = eval_class_log_probs(m, head, x);
            for (std::size_t i = 0; i < lp.rows(); ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < lp.cols(); ++j) sum += std::exp(lp.at(i, j));
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("K=2 logits (1,0) give the textbook probabilities") {
    UodaModel m = init_model(2, {3}, 2, 2, 3);
    for (auto* t : group_tensors(m.classifier1)) t->fill(0.0);
    m.classifier1.layers[0].bias.at(0) = 1.0;  // logits (1, 0) regardless of features
    Tensor lp = eval_class_log_probs(m, 1, random_batch(2, 2, 5));
    CHECK(std::exp(lp.at(0, 0)) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(std::exp(lp.at(0, 1)) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
}

TEST_CASE("updating one head never changes the other head's outputs") {
    UodaModel m = init_model(2, {5}, 2, 3, 8);
    Tensor x = random_batch(4, 2, 6);
    Tensor before = eval_class_log_probs(m, 2, x);
    for (auto* t : group_tensors(m.classifier1)) {
        for (std::size_t i = 0; i < t->numel(); ++i) t->at(i) += 0.37;
    }
    Tensor after = eval_class_log_probs(m, 2, x);
    CHECK(before.data() == after.data());

    Tensor head1_before = eval_class_log_probs(m, 1, x);
    for (auto* t : group_tensors(m.classifier2)) {
        for (std::size_t i = 0; i < t->numel(); ++i) t->at(i) -= 0.11;
    }
    CHECK(eval_class_log_probs(m, 1, x).data() == head1_before.data());
}

TEST_CASE("generator gradient matches finite differences") {
    UodaModel m = init_model(3, {5}, 2, 2, 14);
    Tensor x = random_batch(4, 3, 2);
    Tensor w = random_batch(4, 2, 3);

    auto loss = [&](const std::vector<Tensor>& p) {
        UodaModel probe = m;
        std::vector<Tensor*> slots = group_tensors(probe.generator);
        for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = p[i];
        Graph g;
        BoundMlp gen = bind_mlp(g, probe.generator, false);
        NodeId f = features(g, gen, g.input(x));
        return g.value(g.sum_all(g.mul(f, g.input(w)))).item();
    };

    Graph g;
    BoundMlp gen = bind_mlp(g, m.generator, true);
    NodeId f = features(g, gen, g.input(x));
    GradientMap grads = g.backward(g.sum_all(g.mul(f, g.input(w))));

    std::vector<Tensor> params;
    for (auto* t : group_tensors(m.generator)) params.push_back(*t);
    std::vector<Tensor> fd = finite_difference_grads(loss, params);
    std::vector<NodeId> ids = gen.all();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        CHECK(max_rel_error(grads.at(ids[i]), fd[i]) < 1e-4);
    }
}

TEST_CASE("optional hidden layer on the heads") {
    UodaModel m = init_model(2, {8}, 2, 3, 4, {16});
    REQUIRE(m.classifier1.layers.size() == 2);
    CHECK(m.classifier1.layers[0].weight.shape() == Shape{2, 16});
    CHECK(m.classifier1.layers[1].weight.shape() == Shape{16, 3});
    Tensor lp = eval_class_log_probs(m, 1, random_batch(3, 2, 2));
    CHECK(lp.shape() == Shape{3, 3});
}

TEST_CASE("invalid head id is rejected") {
    UodaModel m = init_model(2, {4}, 2, 2, 4);
    CHECK_THROWS_AS(eval_class_log_probs(m, 0, random_batch(2, 2, 1)), ContractError);
    CHECK_THROWS_AS(eval_class_log_probs(m, 3, random_batch(2, 2, 1)), ContractError);
}

TEST_CASE("checkpoint round-trip is value-exact") {
    UodaModel m = init_model(3, {7, 5}, 2, 3, 123, {4});
    std::filesystem::path path = std::filesystem::temp_directory_path() / "uoda_ckpt_test.json";
    save_checkpoint(m, path.string());
    UodaModel loaded = load_checkpoint(path.string());
    CHECK(loaded.input_dim == m.input_dim);
    CHECK(loaded.feature_dim == m.feature_dim);
    CHECK(loaded.num_classes == m.num_classes);
    CHECK(loaded.generator_spec.layer_widths == m.generator_spec.layer_widths);
    CHECK(same_params(loaded.generator, m.generator));
    CHECK(same_params(loaded.classifier1, m.classifier1));
    CHECK(same_params(loaded.classifier2, m.classifier2));
    std::filesystem::remove(path);
}

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "feddm/data.hpp"
#include "feddm/model.hpp"
#include "feddm/numerics.hpp"
#include "feddm/rng.hpp"
#include "feddm/tensor.hpp"

using namespace feddm;

namespace {

std::vector<double> random_batch(int n, int dim, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(n) * dim);
    for (double& v : x) v = gauss(rng);
    return x;
}

std::vector<int> random_labels(int n, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> pick(0, classes - 1);
    std::vector<int> y(n);
    for (int& v : y) v = pick(rng);
    return y;
}

double model_loss(const Model& proto, const ParamVector& p, const std::vector<double>& batch,
                  int n, const std::vector<int>& labels) {
    Model m = proto;
    m.set_params(p);
    const ForwardPass fp = m.forward(batch, n, false, false);
    return softmax_xent(fp.logits, labels).item();
}

void gradcheck(const Model& model, const std::vector<double>& batch, int n,
               const std::vector<int>& labels, double tol) {
    const ForwardPass fp = model.forward(batch, n, true, false);
    backward(softmax_xent(fp.logits, labels));
    const ParamVector g = model.collect_param_grads(fp);
    const ParamVector fd = finite_diff_grad(
        [&](const ParamVector& p) { return model_loss(model, p, batch, n, labels); },
        model.params(), 1e-5);
    REQUIRE(g.size() == fd.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double denom = std::max(1.0, std::abs(fd[i]));
        CHECK(std::abs(g[i] - fd[i]) / denom <= tol);
    }
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter counts") {
    CHECK(param_count(ModelSpec{Logistic1dSpec{}}) == 1);
    CHECK(param_count(ModelSpec{MlpSpec{{784, 128, 10}}}) == 101770);
    const ConvNetLiteSpec conv{1, 28, 28, {8, 16, 16}, 10};
    const Model m = Model::make(ModelSpec{conv}, 3);
    CHECK(m.param_count() == param_count(ModelSpec{conv}));
    CHECK(m.param_count() > 0);
}

TEST_CASE("logistic-1d with zero weight scores 0.5") {
    Model m = Model::make(ModelSpec{Logistic1dSpec{}}, 1);
    m.set_params({0.0});
    const auto logits = m.eval_logits({2.5}, 1);
    REQUIRE(logits.size() == 2);
    CHECK(logits[0] == 0.0);
    CHECK(logits[1] == 0.0);
    // sigmoid of the class-1 margin is exactly 1/2
    CHECK(1.0 / (1.0 + std::exp(-(logits[1] - logits[0]))) == 0.5);
}

TEST_CASE("forward shapes and determinism") {
    const Model m = Model::make(ModelSpec{MlpSpec{{4, 8, 3}}}, 11);
    const auto x = random_batch(5, 4, 2);
    const ForwardPass fp = m.forward(x, 5, false, false);
    CHECK(fp.embed.shape() == Shape{5, m.embed_dim()});
    CHECK(fp.logits.shape() == Shape{5, 3});

    // duplicate a row: identical inputs produce identical embeddings
    std::vector<double> dup(x.begin(), x.begin() + 4);
    dup.insert(dup.end(), x.begin(), x.begin() + 4);
    const ForwardPass fp2 = m.forward(dup, 2, false, false);
    for (int j = 0; j < m.embed_dim(); ++j) {
        CHECK(fp2.embed.values()[j] == fp2.embed.values()[m.embed_dim() + j]);
    }
}

TEST_CASE("mlp gradient check") {
    const Model m = Model::make(ModelSpec{MlpSpec{{6, 10, 8, 4}}}, 5);
    gradcheck(m, random_batch(7, 6, 21), 7, random_labels(7, 4, 22), 1e-4);
}

TEST_CASE("convnet-lite gradient check") {
    const ConvNetLiteSpec conv{1, 8, 8, {3, 4, 4}, 3};
    const Model m = Model::make(ModelSpec{conv}, 9);
    gradcheck(m, random_batch(3, 64, 31), 3, random_labels(3, 3, 32), 1e-4);
}

TEST_CASE("embedding input gradient vs finite differences") {
    const Model m = Model::make(ModelSpec{MlpSpec{{3, 6, 2}}}, 13);
    const auto x = random_batch(2, 3, 41);
    const ForwardPass fp = m.forward(x, 2, false, true);
    backward(sum(fp.embed));
    const auto& g = fp.input.grad();
    const auto fd = finite_diff_grad(
        [&](const ParamVector& xv) {
            const ForwardPass f = m.forward(xv, 2, false, false);
            return sum(f.embed).item();
        },
        x, 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(g[i] - fd[i]) <= 1e-4 * std::max(1.0, std::abs(fd[i])));
    }
}

TEST_CASE("accuracy tie-break and memorizer") {
    // zero logits everywhere: argmax picks class 0
    Dataset d;
    d.name = "ties";
    d.example_shape = {1};
    d.num_classes = 2;
    d.examples = {1.0, -1.0, 2.0, -2.0};
    d.labels = {0, 0, 1, 1};
    Model m = Model::make(ModelSpec{Logistic1dSpec{}}, 1);
    m.set_params({0.0});
    CHECK(m.accuracy(d) == 0.5);  // the two class-0 examples

    // a strongly positive weight classifies sign-separated data perfectly
    Dataset sep = d;
    sep.labels = {1, 0, 1, 0};
    m.set_params({10.0});
    CHECK(m.accuracy(sep) == 1.0);
}

TEST_CASE("random 10-class model is near chance") {
    const Model m = Model::make(ModelSpec{MlpSpec{{8, 16, 10}}}, 77);
    Dataset d;
    d.name = "rand";
    d.example_shape = {8};
    d.num_classes = 10;
    d.examples = random_batch(1000, 8, 101);
    d.labels = random_labels(1000, 10, 102);
    const double acc = m.accuracy(d);
    CHECK(acc > 0.05);
    CHECK(acc < 0.15);
}

}  // TEST_SUITE

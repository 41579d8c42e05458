#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "feddm/data.hpp"
#include "feddm/errors.hpp"
#include "feddm/federation.hpp"
#include "feddm/model.hpp"
#include "feddm/rng.hpp"

using namespace feddm;

namespace {

struct Fixture {
    Dataset train = gen_blobs(20, 4, 2, 0.5, 100);
    Dataset test = gen_blobs(10, 4, 2, 0.5, 101);
    Partition partition = dirichlet_partition(train.labels, 3, 0.5, 102);
    Model prototype = Model::make(ModelSpec{MlpSpec{{2, 8, 4}}}, 103);

    FedRunConfig cfg() const {
        FedRunConfig c;
        c.rounds = 2;
        c.seed = 7;
        c.client.ipc = 2;
        c.client.match_iters = 3;
        c.client.real_batch = 8;
        c.server.epochs = 2;
        c.server.batch = 16;
        c.local_epochs = 2;
        c.local_lr = 0.05;
        return c;
    }
};

}  // namespace

TEST_SUITE("federation") {

TEST_CASE("protocol names") {
    for (Protocol p : {Protocol::kFedDm, Protocol::kFedAvg, Protocol::kFedProx, Protocol::kReal}) {
        CHECK(protocol_from_name(protocol_name(p)) == p);
    }
    CHECK_THROWS_AS((void)protocol_from_name("gossip"), ConfigError);
}

TEST_CASE("hash_params distinguishes parameter vectors") {
    CHECK(hash_params({1.0, 2.0}) == hash_params({1.0, 2.0}));
    CHECK(hash_params({1.0, 2.0}) != hash_params({2.0, 1.0}));
    CHECK(hash_params({}) == hash_params({}));
}

TEST_CASE("aggregate_surrogate weights") {
    SyntheticSet a;
    a.ipc = 2;
    a.example_shape = {1};
    a.classes = {0};
    a.values = {1.0, 2.0};
    a.labels = {0, 0};
    SyntheticSet b = a;
    b.classes = {1};
    b.values = {3.0, 4.0};
    b.labels = {1, 1};

    const WeightedDataset single = aggregate_surrogate({a}, 50, 2);
    CHECK(single.data.size() == 2);
    for (double w : single.weights) CHECK(w == 1.0 / 50);

    const WeightedDataset both = aggregate_surrogate({a, b}, 50, 2);
    CHECK(both.data.size() == 4);
    for (double w : both.weights) CHECK(w == both.weights[0]);  // uniform pool
}

TEST_CASE("weighted loss equals the per-client decomposition") {
    const Fixture f;
    Model m = f.prototype;
    std::vector<SyntheticSet> sets;
    for (int k = 0; k < f.partition.clients(); ++k) {
        sets.push_back(init_synthetic(f.partition.view(f.train, k), 2, 200 + k));
    }
    const int n = f.train.size();
    const WeightedDataset pool = aggregate_surrogate(sets, n, f.train.num_classes);
    const double pooled = weighted_ce_loss(m, pool);

    double decomposed = 0.0;
    for (const SyntheticSet& s : sets) {
        // f-hat_k: uniform mean CE over client k's synthetic examples
        WeightedDataset one = aggregate_surrogate({s}, s.size(), f.train.num_classes);
        const double share = static_cast<double>(s.size()) / n;
        decomposed += share * weighted_ce_loss(m, one);
    }
    CHECK(std::abs(pooled - decomposed) <= 1e-10);
}

TEST_CASE("server_train stays in the trust ball") {
    const Fixture f;
    std::vector<SyntheticSet> sets;
    for (int k = 0; k < f.partition.clients(); ++k) {
        sets.push_back(init_synthetic(f.partition.view(f.train, k), 2, 300 + k));
    }
    const WeightedDataset pool = aggregate_surrogate(sets, f.train.size(), 4);
    const ParamVector w0 = f.prototype.params();

    ServerConfig zero;
    zero.epochs = 0;
    CHECK(server_train(f.prototype, w0, pool, zero, 1) == w0);

    ServerConfig tight;
    tight.epochs = 3;
    tight.batch = 16;
    tight.eta_s = 0.5;  // deliberately large steps
    tight.rho = 0.1;
    const ParamVector w1 = server_train(f.prototype, w0, pool, tight, 1);
    double dist2 = 0.0;
    for (std::size_t i = 0; i < w0.size(); ++i) dist2 += (w1[i] - w0[i]) * (w1[i] - w0[i]);
    CHECK(std::sqrt(dist2) <= 0.1 + 1e-12);
}

TEST_CASE("proximal term pulls local weights toward the reference") {
    const Fixture f;
    const DatasetView v = f.partition.view(f.train, 0);
    const ParamVector w0 = f.prototype.params();
    double prev = 1e300;
    for (double mu : {0.0, 1.0, 10.0, 50.0}) {
        // keep lr * mu < 1 so the proximal pull is a stable contraction
        const ParamVector w = local_sgd_train(f.prototype, w0, v, 3, 8, 0.01, mu, w0, 5);
        double d2 = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) d2 += (w[i] - w0[i]) * (w[i] - w0[i]);
        CHECK(d2 <= prev + 1e-12);
        prev = d2;
    }
}

TEST_CASE("fedprox with mu=0 is bitwise fedavg") {
    const Fixture f;
    FedRunConfig cfg = f.cfg();
    cfg.protocol = Protocol::kFedAvg;
    const RunResult avg = run_protocol(cfg, f.train, f.partition, f.test, f.prototype);
    cfg.protocol = Protocol::kFedProx;
    cfg.mu = 0.0;
    const RunResult prox = run_protocol(cfg, f.train, f.partition, f.test, f.prototype);
    CHECK(prox.final_params == avg.final_params);
    REQUIRE(prox.history.rounds.size() == avg.history.rounds.size());
    for (std::size_t r = 0; r < avg.history.rounds.size(); ++r) {
        CHECK(prox.history.rounds[r].params_hash == avg.history.rounds[r].params_hash);
        CHECK(prox.history.rounds[r].test_accuracy == avg.history.rounds[r].test_accuracy);
    }
}

TEST_CASE("single-client fedavg is centralized sgd") {
    const Fixture f;
    Partition whole;
    whole.index_sets = {full_view(f.train).indices};
    FedRunConfig cfg = f.cfg();
    cfg.protocol = Protocol::kFedAvg;
    cfg.rounds = 3;
    const RunResult fed = run_protocol(cfg, f.train, whole, f.test, f.prototype);

    ParamVector w = f.prototype.params();
    for (int round = 1; round <= cfg.rounds; ++round) {
        const std::uint64_t seed = derive_seed(
            {cfg.seed, static_cast<std::uint64_t>(round), std::uint64_t{0}});
        w = local_sgd_train(f.prototype, w, full_view(f.train), cfg.local_epochs,
                            cfg.client.real_batch, cfg.local_lr, 0.0, w, seed);
    }
    CHECK(fed.final_params == w);
}

TEST_CASE("feddm run is deterministic and accounted") {
    const Fixture f;
    const FedRunConfig cfg = f.cfg();
    const RunResult a = run_feddm(cfg, f.train, f.partition, f.test, f.prototype);
    const RunResult b = run_feddm(cfg, f.train, f.partition, f.test, f.prototype);
    CHECK(a.history.csv() == b.history.csv());
    CHECK(a.final_params == b.final_params);

    // worker count must not change the result
    FedRunConfig par = cfg;
    par.workers = 3;
    const RunResult c = run_feddm(par, f.train, f.partition, f.test, f.prototype);
    CHECK(c.final_params == a.final_params);
    CHECK(c.history.csv() == a.history.csv());

    // payload: sum_k cpc_k * ipc * example_floats, every round
    std::int64_t expect = 0;
    for (const SyntheticSet& s : a.final_synthetic) {
        expect += static_cast<std::int64_t>(s.classes.size()) * cfg.client.ipc * 2;
    }
    for (const RoundRecord& r : a.history.rounds) CHECK(r.floats_uploaded == expect);
    CHECK(a.history.rounds.back().cumulative_floats == expect * cfg.rounds);
    for (const RoundRecord& r : a.history.rounds) CHECK(r.wall_ms == 0);
}

TEST_CASE("real baseline shares the feddm payload shape") {
    const Fixture f;
    const FedRunConfig cfg = f.cfg();
    const RunResult dm = run_feddm(cfg, f.train, f.partition, f.test, f.prototype);
    const RunResult re = run_real(cfg, f.train, f.partition, f.test, f.prototype);
    CHECK(re.history.rounds[0].floats_uploaded == dm.history.rounds[0].floats_uploaded);
    CHECK(re.history.rounds[0].protocol == "real");
}

TEST_CASE("no-op pipeline keeps the initial accuracy") {
    const Fixture f;
    Partition whole;
    whole.index_sets = {full_view(f.train).indices};
    FedRunConfig cfg = f.cfg();
    cfg.rounds = 1;
    cfg.client.match_iters = 0;
    cfg.server.epochs = 0;
    const RunResult r = run_feddm(cfg, f.train, whole, f.test, f.prototype);
    CHECK(r.history.rounds[0].test_accuracy == f.prototype.accuracy(f.test));
    CHECK(r.final_params == f.prototype.params());
}

TEST_CASE("history csv layout") {
    const Fixture f;
    FedRunConfig cfg = f.cfg();
    cfg.protocol = Protocol::kFedAvg;
    cfg.rounds = 2;
    const RunResult r = run_protocol(cfg, f.train, f.partition, f.test, f.prototype);
    const std::string csv = r.history.csv();
    CHECK(csv.rfind("round,protocol,floats_uploaded,cumulative_floats,test_accuracy,"
                    "sigma,epsilon,delta,wall_ms\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rounds
    CHECK(csv.find("fedavg") != std::string::npos);
}

}  // TEST_SUITE

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feddm/data.hpp"
#include "feddm/distillation.hpp"
#include "feddm/model.hpp"

namespace feddm {

enum class Protocol { kFedDm, kFedAvg, kFedProx, kReal };

std::string protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);  // throws ConfigError

struct ServerConfig {
    double eta_s = 0.01;
    int epochs = 500;
    int batch = 256;
    double rho = 5.0;
};

struct FedRunConfig {
    Protocol protocol = Protocol::kFedDm;
    int rounds = 20;
    std::uint64_t seed = 1;
    int workers = 1;
    ClientConfig client;     // feddm / real
    ServerConfig server;
    int local_epochs = 10;   // fedavg / fedprox
    double local_lr = 0.01;
    double mu = 0.0;         // fedprox proximal coefficient
    double epsilon = 0.0;    // reported DP budget (logging only)
    double delta = 0.0;
    bool record_walltime = false;

    void validate() const;
};

struct RoundRecord {
    int round = 0;
    std::string protocol;
    std::int64_t floats_uploaded = 0;
    std::int64_t cumulative_floats = 0;
    double test_accuracy = 0.0;
    double sigma = 0.0;
    double epsilon = 0.0;
    double delta = 0.0;
    std::int64_t wall_ms = 0;
    std::uint64_t params_hash = 0;
};

struct RunHistory {
    std::vector<RoundRecord> rounds;

    std::string csv() const;  // fixed column order
};

struct RunResult {
    RunHistory history;
    ParamVector final_params;
    std::vector<SyntheticSet> final_synthetic;  // feddm / real only
};

// Synthetic examples pooled across clients with per-example sampling weight
// n_k^S / (n * n_k^S) = 1/n, n = total real examples.
struct WeightedDataset {
    Dataset data;
    std::vector<double> weights;  // unnormalized; see weighted_ce_loss
};

WeightedDataset aggregate_surrogate(const std::vector<SyntheticSet>& syn_sets,
                                    int total_real_examples, int num_classes);

// sum_i weights[i] * ce_i over the whole pool (no normalization), so the
// value equals sum_k (n_k^S / n) * fhat_k.
double weighted_ce_loss(const Model& model, const WeightedDataset& surrogate);

// Mini-batch SGD on weighted cross-entropy, projecting onto the rho-ball
// around w_r after every step.
ParamVector server_train(const Model& prototype, const ParamVector& w_r,
                         const WeightedDataset& surrogate, const ServerConfig& cfg,
                         std::uint64_t seed);

// Local SGD used by FedAvg/FedProx clients and by centralized baselines.
// mu > 0 adds the proximal gradient mu * (w - w_ref).
ParamVector local_sgd_train(const Model& prototype, const ParamVector& w0,
                            const DatasetView& data, int epochs, int batch, double lr,
                            double mu, const ParamVector& w_ref, std::uint64_t seed);

RunResult run_feddm(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                    const Dataset& test, const Model& prototype);
RunResult run_fedavg(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                     const Dataset& test, const Model& prototype);
RunResult run_fedprox(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                      const Dataset& test, const Model& prototype);
RunResult run_real(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                   const Dataset& test, const Model& prototype);

// Dispatch on cfg.protocol.
RunResult run_protocol(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                       const Dataset& test, const Model& prototype);

std::uint64_t hash_params(const ParamVector& params);

}  // namespace feddm

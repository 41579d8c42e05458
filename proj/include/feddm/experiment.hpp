#pragma once

#include <cstdint>
#include <string>

#include "feddm/federation.hpp"

namespace feddm {

// Flat key-value experiment description. Unknown keys are rejected and all
// numeric ranges validated at parse time.
struct ExperimentConfig {
    std::string protocol = "feddm";
    int rounds = 20;
    int clients = 10;
    double alpha = 0.5;
    std::uint64_t seed = 1;
    int workers = 1;

    int ipc = 10;
    int match_iters = 1000;     // T
    double client_lr = 1.0;     // eta_c
    int real_batch = 256;
    double rho = 5.0;
    double sigma = 0.0;
    double clip = 5.0;
    double epsilon = 0.0;
    double delta = 0.0;

    int local_epochs = 10;
    double local_lr = 0.01;
    double mu = 0.0;

    double server_lr = 0.01;    // eta_s
    int server_epochs = 500;
    int server_batch = 256;

    std::string model = "mlp";  // logistic-1d | mlp | convnet-lite
    std::string mlp_hidden = "64";
    std::string conv_channels = "8,16,16";

    std::string dataset = "blobs";  // blobs | onedim | idx | cifar
    int blobs_per_class = 200;
    int blobs_classes = 4;
    int blobs_dim = 2;
    double blobs_spread = 0.5;
    int blobs_test_per_class = 100;
    int onedim_n = 100;
    std::string idx_train_images;
    std::string idx_train_labels;
    std::string idx_test_images;
    std::string idx_test_labels;
    std::string cifar_train;
    std::string cifar_test;

    std::string out_dir = "out";
    bool dump_images = false;
    bool record_walltime = false;

    bool operator==(const ExperimentConfig&) const = default;

    FedRunConfig fed_config() const;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
std::string serialize_config(const ExperimentConfig& cfg);

// Materialized experiment inputs.
struct ExperimentData {
    Dataset train;
    Dataset test;
    Partition partition;
    Model prototype;
};

ExperimentData prepare_experiment(const ExperimentConfig& cfg);

// Runs the configured protocol and writes history.csv, manifest.cfg and
// optional synthetic-image dumps into cfg.out_dir.
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace feddm

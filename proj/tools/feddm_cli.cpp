#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feddm/accounting.hpp"
#include "feddm/errors.hpp"
#include "feddm/experiment.hpp"
#include "feddm/privacy.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int cmd_run(const std::string& config_path, std::int64_t seed_override,
            const std::string& out_override, int workers_override) {
    feddm::ExperimentConfig cfg =
        config_path.empty() ? feddm::ExperimentConfig{} : feddm::parse_config(config_path);
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (workers_override > 0) cfg.workers = workers_override;

    const feddm::RunResult result = feddm::run_experiment(cfg);
    const auto& last = result.history.rounds.back();
    std::cout << "protocol " << cfg.protocol << ", " << cfg.rounds
              << " round(s); final test accuracy " << last.test_accuracy
              << ", cumulative floats uploaded " << last.cumulative_floats << "\n"
              << "artifacts written to " << cfg.out_dir << "/\n";
    return kExitOk;
}

int cmd_msgsize(const std::string& cpc_csv, int clients, int classes, int per_class,
                double alpha, std::uint64_t seed, int ipc, std::int64_t example_floats,
                std::int64_t params, bool as_csv) {
    std::vector<int> cpc;
    if (!cpc_csv.empty()) {
        std::string item;
        std::stringstream ss(cpc_csv);
        while (std::getline(ss, item, ',')) cpc.push_back(std::stoi(item));
    } else {
        // draw a Dirichlet partition over a balanced synthetic label set
        std::vector<int> labels;
        for (int c = 0; c < classes; ++c) labels.insert(labels.end(), per_class, c);
        const feddm::Partition part = feddm::dirichlet_partition(labels, clients, alpha, seed);
        feddm::Dataset d;
        d.num_classes = classes;
        d.labels = labels;
        d.example_shape = {1};
        d.examples.assign(labels.size(), 0.0);
        for (int k = 0; k < part.clients(); ++k) cpc.push_back(part.classes_at(d, k));
    }
    const feddm::PayloadReport report = feddm::feddm_payload_report(cpc, ipc, example_floats);
    std::cout << (as_csv ? report.csv() : report.aligned_text());
    if (params > 0) {
        std::cout << "baseline floats per round (" << params << " params x " << cpc.size()
                  << " clients): "
                  << feddm::baseline_message_size(params, static_cast<int>(cpc.size())) << "\n";
    }
    return kExitOk;
}

int cmd_calibrate_dp(double epsilon, double delta, double q, int steps) {
    const feddm::DpBudget budget{epsilon, delta};
    std::cout << "gaussian mechanism sigma: " << feddm::gaussian_sigma(budget) << "\n";
    if (q > 0.0) {
        std::cout << "budget check (T*q^2 <= eps/2): "
                  << (feddm::check_budget(q, steps, epsilon) ? "ok" : "VIOLATED") << "\n";
        std::cout << "tail-bound sigma: " << feddm::tailbound_sigma(budget, q, steps) << "\n";
        std::cout << "simplified bound sqrt(2 ln(1/delta)/eps): "
                  << feddm::tailbound_sigma_simplified(budget) << "\n";
    }
    return kExitOk;
}

int cmd_partition_stats(int clients, int classes, int per_class, double alpha,
                        std::uint64_t seed) {
    std::vector<int> labels;
    for (int c = 0; c < classes; ++c) labels.insert(labels.end(), per_class, c);
    const feddm::Partition part = feddm::dirichlet_partition(labels, clients, alpha, seed);
    std::cout << "client  n_k  per-class counts\n";
    for (int k = 0; k < part.clients(); ++k) {
        std::vector<int> hist(classes, 0);
        for (int i : part.index_sets[k]) ++hist[labels[i]];
        std::cout << k << "\t" << part.index_sets[k].size() << "\t";
        for (int c = 0; c < classes; ++c) std::cout << hist[c] << (c + 1 < classes ? " " : "\n");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedDM federated-learning simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    std::string config_path, out_override;
    std::int64_t seed_override = -1;
    int workers_override = 0;
    run->add_option("--config", config_path, "flat key-value config file");
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--out", out_override, "override the output directory");
    run->add_option("--workers", workers_override, "client worker threads");

    // msgsize
    auto* msg = app.add_subcommand("msgsize", "per-round upload accounting");
    std::string cpc_csv;
    int m_clients = 10, m_classes = 10, m_per_class = 1000, m_ipc = 10;
    double m_alpha = 0.5;
    std::uint64_t m_seed = 1;
    std::int64_t m_floats = 3072, m_params = 0;
    bool m_csv = false;
    msg->add_option("--cpc", cpc_csv, "explicit per-client class counts, comma separated");
    msg->add_option("--clients", m_clients, "clients (when drawing a partition)");
    msg->add_option("--classes", m_classes, "classes (when drawing a partition)");
    msg->add_option("--per-class", m_per_class, "examples per class (when drawing)");
    msg->add_option("--alpha", m_alpha, "Dirichlet concentration");
    msg->add_option("--seed", m_seed, "partition seed");
    msg->add_option("--ipc", m_ipc, "synthetic images per class");
    msg->add_option("--example-floats", m_floats, "floats per example");
    msg->add_option("--param-count", m_params, "model parameter count for the baseline row");
    msg->add_flag("--csv", m_csv, "emit CSV instead of aligned text");

    // calibrate-dp
    auto* dp = app.add_subcommand("calibrate-dp", "Gaussian-mechanism calibration");
    double d_eps = 1.0, d_delta = 1e-5, d_q = 0.0;
    int d_steps = 1;
    dp->add_option("--epsilon", d_eps, "privacy budget epsilon")->required();
    dp->add_option("--delta", d_delta, "privacy budget delta")->required();
    dp->add_option("--q", d_q, "sampling rate (enables the tail bound)");
    dp->add_option("--steps", d_steps, "number of steps T");

    // partition-stats
    auto* ps = app.add_subcommand("partition-stats", "per-client class histograms");
    int p_clients = 10, p_classes = 10, p_per_class = 1000;
    double p_alpha = 0.5;
    std::uint64_t p_seed = 1;
    ps->add_option("--clients", p_clients, "number of clients");
    ps->add_option("--classes", p_classes, "number of classes");
    ps->add_option("--per-class", p_per_class, "examples per class");
    ps->add_option("--alpha", p_alpha, "Dirichlet concentration");
    ps->add_option("--seed", p_seed, "partition seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            return cmd_run(config_path, seed_override, out_override, workers_override);
        }
        if (msg->parsed()) {
            return cmd_msgsize(cpc_csv, m_clients, m_classes, m_per_class, m_alpha, m_seed,
                               m_ipc, m_floats, m_params, m_csv);
        }
        if (dp->parsed()) return cmd_calibrate_dp(d_eps, d_delta, d_q, d_steps);
        if (ps->parsed()) return cmd_partition_stats(p_clients, p_classes, p_per_class, p_alpha, p_seed);
    } catch (const feddm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const feddm::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}

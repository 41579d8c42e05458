#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feddm/data.hpp"

namespace feddm {

// Float counts uploaded to the server in one round.
struct PayloadReport {
    std::vector<int> classes_per_client;  // cpc_k
    int ipc = 0;
    std::int64_t example_floats = 0;
    std::int64_t total = 0;  // sum_k cpc_k * ipc * example_floats

    std::string aligned_text() const;
    std::string csv() const;
};

// Per-round FedDM / REAL payload from explicit per-client class counts.
std::int64_t feddm_message_size(const std::vector<int>& classes_per_client, int ipc,
                                std::int64_t example_floats);

// Same, with class counts taken from a partition over a labeled dataset.
std::int64_t feddm_message_size(const Partition& partition, const Dataset& dataset,
                                int ipc, std::int64_t example_floats);

PayloadReport feddm_payload_report(const std::vector<int>& classes_per_client, int ipc,
                                   std::int64_t example_floats);

// Weight-transmitting baselines upload param_count floats per client.
std::int64_t baseline_message_size(std::int64_t param_count, int clients);

}  // namespace feddm

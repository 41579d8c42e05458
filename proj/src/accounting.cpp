#include "feddm/accounting.hpp"

#include <sstream>

#include "feddm/errors.hpp"

namespace feddm {

std::int64_t feddm_message_size(const std::vector<int>& classes_per_client, int ipc,
                                std::int64_t example_floats) {
    if (ipc < 1 || example_floats < 1) {
        throw ConfigError("feddm_message_size: ipc and example_floats must be positive");
    }
    std::int64_t total = 0;
    for (int cpc : classes_per_client) total += static_cast<std::int64_t>(cpc) * ipc * example_floats;
    return total;
}

std::int64_t feddm_message_size(const Partition& partition, const Dataset& dataset,
                                int ipc, std::int64_t example_floats) {
    std::vector<int> cpc(partition.clients());
    for (int k = 0; k < partition.clients(); ++k) cpc[k] = partition.classes_at(dataset, k);
    return feddm_message_size(cpc, ipc, example_floats);
}

PayloadReport feddm_payload_report(const std::vector<int>& classes_per_client, int ipc,
                                   std::int64_t example_floats) {
    PayloadReport r;
    r.classes_per_client = classes_per_client;
    r.ipc = ipc;
    r.example_floats = example_floats;
    r.total = feddm_message_size(classes_per_client, ipc, example_floats);
    return r;
}

std::string PayloadReport::aligned_text() const {
    std::ostringstream os;
    os << "client  cpc  ipc  example_floats  floats_uploaded\n";
    for (std::size_t k = 0; k < classes_per_client.size(); ++k) {
        const std::int64_t floats =
            static_cast<std::int64_t>(classes_per_client[k]) * ipc * example_floats;
        os << k;
        for (std::size_t pad = std::to_string(k).size(); pad < 8; ++pad) os << ' ';
        os << classes_per_client[k];
        for (std::size_t pad = std::to_string(classes_per_client[k]).size(); pad < 5; ++pad) os << ' ';
        os << ipc;
        for (std::size_t pad = std::to_string(ipc).size(); pad < 5; ++pad) os << ' ';
        os << example_floats;
        for (std::size_t pad = std::to_string(example_floats).size(); pad < 16; ++pad) os << ' ';
        os << floats << "\n";
    }
    os << "total floats per round: " << total << "\n";
    return os.str();
}

std::string PayloadReport::csv() const {
    std::ostringstream os;
    os << "client,cpc,ipc,example_floats,floats_uploaded\n";
    for (std::size_t k = 0; k < classes_per_client.size(); ++k) {
        os << k << ',' << classes_per_client[k] << ',' << ipc << ',' << example_floats << ','
           << static_cast<std::int64_t>(classes_per_client[k]) * ipc * example_floats << "\n";
    }
    os << "total,,,," << total << "\n";
    return os.str();
}

std::int64_t baseline_message_size(std::int64_t param_count, int clients) {
    if (param_count < 1 || clients < 1) {
        throw ConfigError("baseline_message_size: inputs must be positive");
    }
    return param_count * clients;
}

}  // namespace feddm

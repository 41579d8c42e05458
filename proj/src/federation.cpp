#include "feddm/federation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "feddm/accounting.hpp"
#include "feddm/errors.hpp"

namespace feddm {

std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::kFedDm: return "feddm";
        case Protocol::kFedAvg: return "fedavg";
        case Protocol::kFedProx: return "fedprox";
        case Protocol::kReal: return "real";
    }
    return "unknown";
}

Protocol protocol_from_name(const std::string& name) {
    if (name == "feddm") return Protocol::kFedDm;
    if (name == "fedavg") return Protocol::kFedAvg;
    if (name == "fedprox") return Protocol::kFedProx;
    if (name == "real") return Protocol::kReal;
    throw ConfigError("unknown protocol: " + name);
}

void FedRunConfig::validate() const {
    if (rounds < 1) throw ConfigError("run config: rounds must be >= 1");
    if (workers < 1) throw ConfigError("run config: workers must be >= 1");
    if (local_epochs < 0) throw ConfigError("run config: local_epochs must be >= 0");
    if (!(local_lr > 0.0)) throw ConfigError("run config: local_lr must be positive");
    if (mu < 0.0) throw ConfigError("run config: mu must be >= 0");
    if (server.epochs < 0) throw ConfigError("run config: server epochs must be >= 0");
    if (!(server.eta_s > 0.0)) throw ConfigError("run config: server lr must be positive");
    if (server.batch < 1) throw ConfigError("run config: server batch must be >= 1");
    if (server.rho < 0.0) throw ConfigError("run config: server rho must be >= 0");
    client.validate();
}

std::string RunHistory::csv() const {
    std::ostringstream os;
    os << "round,protocol,floats_uploaded,cumulative_floats,test_accuracy,sigma,epsilon,delta,wall_ms\n";
    char buf[64];
    for (const RoundRecord& r : rounds) {
        os << r.round << ',' << r.protocol << ',' << r.floats_uploaded << ','
           << r.cumulative_floats << ',';
        std::snprintf(buf, sizeof(buf), "%.6f", r.test_accuracy);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.sigma);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.epsilon);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.delta);
        os << buf << ',' << r.wall_ms << "\n";
    }
    return os.str();
}

std::uint64_t hash_params(const ParamVector& params) {
    // FNV-1a over the raw bytes
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : params) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

WeightedDataset aggregate_surrogate(const std::vector<SyntheticSet>& syn_sets,
                                    int total_real_examples, int num_classes) {
    WeightedDataset out;
    bool any = false;
    for (const SyntheticSet& s : syn_sets) {
        if (s.size() == 0) continue;
        if (!any) {
            out.data.name = "surrogate";
            out.data.example_shape = s.example_shape;
            out.data.num_classes = num_classes;
            any = true;
        }
        out.data.examples.insert(out.data.examples.end(), s.values.begin(), s.values.end());
        out.data.labels.insert(out.data.labels.end(), s.labels.begin(), s.labels.end());
        // each client-k example carries (n_k^S / n) * (1 / n_k^S) = 1/n
        out.weights.insert(out.weights.end(), s.labels.size(), 1.0 / total_real_examples);
    }
    if (!any) throw DataError("aggregate_surrogate: all synthetic sets are empty");
    return out;
}

double weighted_ce_loss(const Model& model, const WeightedDataset& surrogate) {
    const int n = surrogate.data.size();
    const int c = model.num_classes();
    const std::vector<double> z = model.eval_logits(surrogate.data.examples, n);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double zmax = z[i * c];
        for (int j = 1; j < c; ++j) zmax = std::max(zmax, z[i * c + j]);
        double se = 0.0;
        for (int j = 0; j < c; ++j) se += std::exp(z[i * c + j] - zmax);
        loss += surrogate.weights[i] *
                (std::log(se) + zmax - z[i * c + surrogate.data.labels[i]]);
    }
    return loss;
}

ParamVector server_train(const Model& prototype, const ParamVector& w_r,
                         const WeightedDataset& surrogate, const ServerConfig& cfg,
                         std::uint64_t seed) {
    if (surrogate.data.size() == 0) throw DataError("server_train: empty surrogate");
    Model model = prototype;
    ParamVector w = w_r;
    Rng rng(derive_seed({seed, 0x53525652ULL}));
    const int n = surrogate.data.size();
    const int dim = model.input_dim();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int start = 0; start < n; start += cfg.batch) {
            const int m = std::min(cfg.batch, n - start);
            std::vector<double> x(static_cast<std::size_t>(m) * dim);
            std::vector<int> y(m);
            std::vector<double> bw(m);
            double wsum = 0.0;
            for (int i = 0; i < m; ++i) {
                const int idx = perm[start + i];
                std::copy(surrogate.data.row(idx), surrogate.data.row(idx) + dim,
                          x.begin() + static_cast<std::size_t>(i) * dim);
                y[i] = surrogate.data.labels[idx];
                bw[i] = surrogate.weights[idx];
                wsum += bw[i];
            }
            for (double& v : bw) v /= wsum;  // batch-local weighted mean
            model.set_params(w);
            const ForwardPass fp = model.forward(x, m, true, false);
            const Tensor loss = softmax_xent(fp.logits, y, bw);
            check_finite(loss, "server loss");
            backward(loss);
            w = project_ball(sgd_step(w, model.collect_param_grads(fp), cfg.eta_s), w_r, cfg.rho);
        }
    }
    return w;
}

ParamVector local_sgd_train(const Model& prototype, const ParamVector& w0,
                            const DatasetView& data, int epochs, int batch, double lr,
                            double mu, const ParamVector& w_ref, std::uint64_t seed) {
    Model model = prototype;
    ParamVector w = w0;
    Rng rng(derive_seed({seed, 0x4c4f43ULL}));
    const int n = data.size();
    const int dim = model.input_dim();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        for (int start = 0; start < n; start += batch) {
            const int m = std::min(batch, n - start);
            std::vector<double> x(static_cast<std::size_t>(m) * dim);
            std::vector<int> y(m);
            for (int i = 0; i < m; ++i) {
                const int idx = data.indices[perm[start + i]];
                std::copy(data.data->row(idx), data.data->row(idx) + dim,
                          x.begin() + static_cast<std::size_t>(i) * dim);
                y[i] = data.data->labels[idx];
            }
            model.set_params(w);
            const ForwardPass fp = model.forward(x, m, true, false);
            const Tensor loss = softmax_xent(fp.logits, y);
            check_finite(loss, "local loss");
            backward(loss);
            ParamVector g = model.collect_param_grads(fp);
            if (mu > 0.0) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += mu * (w[i] - w_ref[i]);
            }
            w = sgd_step(w, g, lr);
        }
    }
    return w;
}

namespace {

// Runs fn(k) for k in [0, count) on cfg.workers threads. Results must not
// depend on execution order.
void parallel_clients(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= count) return;
            try {
                fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int t = std::min(workers, count);
    pool.reserve(t);
    for (int i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::int64_t synthetic_payload(const std::vector<SyntheticSet>& syn_sets) {
    std::vector<int> cpc;
    cpc.reserve(syn_sets.size());
    std::int64_t example_floats = 1;
    int ipc = 1;
    for (const SyntheticSet& s : syn_sets) {
        cpc.push_back(static_cast<int>(s.classes.size()));
        example_floats = s.input_dim();
        ipc = s.ipc;
    }
    return feddm_message_size(cpc, ipc, example_floats);
}

RunResult run_synthetic_protocol(const FedRunConfig& cfg, const Dataset& train,
                                 const Partition& partition, const Dataset& test,
                                 const Model& prototype, bool optimize) {
    cfg.validate();
    const int clients = partition.clients();
    ParamVector w = prototype.params();
    RunResult result;
    std::int64_t cumulative = 0;

    for (int round = 1; round <= cfg.rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<SyntheticSet> syn(clients);
        parallel_clients(clients, cfg.workers, [&](int k) {
            const DatasetView view = partition.view(train, k);
            const std::uint64_t client_seed =
                derive_seed({cfg.seed, static_cast<std::uint64_t>(round),
                             static_cast<std::uint64_t>(k)});
            if (optimize) {
                syn[k] = client_update(view, w, prototype, cfg.client, client_seed);
            } else {
                // REAL baseline: ship ipc randomly selected real examples per
                // present class, same payload shape as FedDM.
                syn[k] = init_synthetic(view, cfg.client.ipc, derive_seed({client_seed, 1}));
            }
            syn[k].client_id = k;
        });

        const WeightedDataset surrogate =
            aggregate_surrogate(syn, train.size(), train.num_classes);
        w = server_train(prototype, w, surrogate, cfg.server,
                         derive_seed({cfg.seed, static_cast<std::uint64_t>(round), 0x534556ULL}));

        Model eval_model = prototype;
        eval_model.set_params(w);

        RoundRecord rec;
        rec.round = round;
        rec.protocol = protocol_name(optimize ? Protocol::kFedDm : Protocol::kReal);
        rec.floats_uploaded = synthetic_payload(syn);
        cumulative += rec.floats_uploaded;
        rec.cumulative_floats = cumulative;
        rec.test_accuracy = eval_model.accuracy(test);
        rec.sigma = cfg.client.sigma;
        rec.epsilon = cfg.epsilon;
        rec.delta = cfg.delta;
        rec.params_hash = hash_params(w);
        if (cfg.record_walltime) {
            rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        }
        result.history.rounds.push_back(std::move(rec));
        if (round == cfg.rounds) result.final_synthetic = std::move(syn);
    }
    result.final_params = std::move(w);
    return result;
}

RunResult run_averaging_protocol(const FedRunConfig& cfg, const Dataset& train,
                                 const Partition& partition, const Dataset& test,
                                 const Model& prototype, double mu, Protocol proto) {
    cfg.validate();
    const int clients = partition.clients();
    ParamVector w = prototype.params();
    RunResult result;
    std::int64_t cumulative = 0;
    const std::int64_t payload = baseline_message_size(prototype.param_count(), clients);

    for (int round = 1; round <= cfg.rounds; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<ParamVector> local(clients);
        parallel_clients(clients, cfg.workers, [&](int k) {
            const DatasetView view = partition.view(train, k);
            const std::uint64_t client_seed =
                derive_seed({cfg.seed, static_cast<std::uint64_t>(round),
                             static_cast<std::uint64_t>(k)});
            local[k] = local_sgd_train(prototype, w, view, cfg.local_epochs, cfg.client.real_batch,
                                       cfg.local_lr, mu, w, client_seed);
        });

        // w_{r+1} = sum_k (n_k / n) w_k
        ParamVector next(w.size(), 0.0);
        for (int k = 0; k < clients; ++k) {
            const double share =
                static_cast<double>(partition.index_sets[k].size()) / train.size();
            for (std::size_t i = 0; i < next.size(); ++i) next[i] += share * local[k][i];
        }
        w = std::move(next);

        Model eval_model = prototype;
        eval_model.set_params(w);

        RoundRecord rec;
        rec.round = round;
        rec.protocol = protocol_name(proto);
        rec.floats_uploaded = payload;
        cumulative += payload;
        rec.cumulative_floats = cumulative;
        rec.test_accuracy = eval_model.accuracy(test);
        rec.sigma = cfg.client.sigma;
        rec.epsilon = cfg.epsilon;
        rec.delta = cfg.delta;
        rec.params_hash = hash_params(w);
        if (cfg.record_walltime) {
            rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        }
        result.history.rounds.push_back(std::move(rec));
    }
    result.final_params = std::move(w);
    return result;
}

}  // namespace

RunResult run_feddm(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                    const Dataset& test, const Model& prototype) {
    return run_synthetic_protocol(cfg, train, partition, test, prototype, true);
}

RunResult run_real(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                   const Dataset& test, const Model& prototype) {
    return run_synthetic_protocol(cfg, train, partition, test, prototype, false);
}

RunResult run_fedavg(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                     const Dataset& test, const Model& prototype) {
    return run_averaging_protocol(cfg, train, partition, test, prototype, 0.0,
                                  Protocol::kFedAvg);
}

RunResult run_fedprox(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                      const Dataset& test, const Model& prototype) {
    return run_averaging_protocol(cfg, train, partition, test, prototype, cfg.mu,
                                  Protocol::kFedProx);
}

RunResult run_protocol(const FedRunConfig& cfg, const Dataset& train, const Partition& partition,
                       const Dataset& test, const Model& prototype) {
    switch (cfg.protocol) {
        case Protocol::kFedDm: return run_feddm(cfg, train, partition, test, prototype);
        case Protocol::kFedAvg: return run_fedavg(cfg, train, partition, test, prototype);
        case Protocol::kFedProx: return run_fedprox(cfg, train, partition, test, prototype);
        case Protocol::kReal: return run_real(cfg, train, partition, test, prototype);
    }
    throw ConfigError("run_protocol: invalid protocol");
}

}  // namespace feddm

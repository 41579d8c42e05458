#include "feddm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "feddm/errors.hpp"
#include "feddm/image_io.hpp"

namespace feddm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': invalid integer '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': invalid number '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': invalid boolean '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& key_registry() {
    static const std::map<std::string, Setter> reg = {
        {"protocol", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             protocol_from_name(v);  // validates
             c.protocol = v;
         }},
        {"rounds", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.rounds = static_cast<int>(parse_int(k, v));
             require(c.rounds >= 1, k, "must be >= 1");
         }},
        {"clients", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.clients = static_cast<int>(parse_int(k, v));
             require(c.clients >= 1, k, "must be >= 1");
         }},
        {"alpha", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.alpha = parse_double(k, v);
             require(c.alpha > 0.0, k, "must be > 0");
         }},
        {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.seed = static_cast<std::uint64_t>(parse_int(k, v));
         }},
        {"workers", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.workers = static_cast<int>(parse_int(k, v));
             require(c.workers >= 1, k, "must be >= 1");
         }},
        {"ipc", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ipc = static_cast<int>(parse_int(k, v));
             require(c.ipc >= 1, k, "must be >= 1");
         }},
        {"match_iters", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.match_iters = static_cast<int>(parse_int(k, v));
             require(c.match_iters >= 0, k, "must be >= 0");
         }},
        {"client_lr", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.client_lr = parse_double(k, v);
             require(c.client_lr > 0.0, k, "must be > 0");
         }},
        {"real_batch", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.real_batch = static_cast<int>(parse_int(k, v));
             require(c.real_batch >= 1, k, "must be >= 1");
         }},
        {"rho", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.rho = parse_double(k, v);
             require(c.rho >= 0.0, k, "must be >= 0");
         }},
        {"sigma", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.sigma = parse_double(k, v);
             require(c.sigma >= 0.0, k, "must be >= 0");
         }},
        {"clip", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.clip = parse_double(k, v);
             require(c.clip > 0.0, k, "must be > 0");
         }},
        {"epsilon", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.epsilon = parse_double(k, v);
             require(c.epsilon >= 0.0, k, "must be >= 0");
         }},
        {"delta", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.delta = parse_double(k, v);
             require(c.delta >= 0.0 && c.delta < 1.0, k, "must be in [0,1)");
         }},
        {"local_epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.local_epochs = static_cast<int>(parse_int(k, v));
             require(c.local_epochs >= 0, k, "must be >= 0");
         }},
        {"local_lr", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.local_lr = parse_double(k, v);
             require(c.local_lr > 0.0, k, "must be > 0");
         }},
        {"mu", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.mu = parse_double(k, v);
             require(c.mu >= 0.0, k, "must be >= 0");
         }},
        {"server_lr", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.server_lr = parse_double(k, v);
             require(c.server_lr > 0.0, k, "must be > 0");
         }},
        {"server_epochs", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.server_epochs = static_cast<int>(parse_int(k, v));
             require(c.server_epochs >= 0, k, "must be >= 0");
         }},
        {"server_batch", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.server_batch = static_cast<int>(parse_int(k, v));
             require(c.server_batch >= 1, k, "must be >= 1");
         }},
        {"model", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             require(v == "logistic-1d" || v == "mlp" || v == "convnet-lite", k,
                     "must be one of logistic-1d, mlp, convnet-lite");
             c.model = v;
         }},
        {"mlp_hidden", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             for (int w : parse_int_list(k, v)) require(w >= 1, k, "widths must be >= 1");
             c.mlp_hidden = v;
         }},
        {"conv_channels", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             const auto ch = parse_int_list(k, v);
             require(ch.size() == 3, k, "expected exactly three channel counts");
             for (int w : ch) require(w >= 1, k, "channels must be >= 1");
             c.conv_channels = v;
         }},
        {"dataset", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             require(v == "blobs" || v == "onedim" || v == "idx" || v == "cifar", k,
                     "must be one of blobs, onedim, idx, cifar");
             c.dataset = v;
         }},
        {"blobs_per_class", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.blobs_per_class = static_cast<int>(parse_int(k, v));
             require(c.blobs_per_class >= 1, k, "must be >= 1");
         }},
        {"blobs_classes", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.blobs_classes = static_cast<int>(parse_int(k, v));
             require(c.blobs_classes >= 2, k, "must be >= 2");
         }},
        {"blobs_dim", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.blobs_dim = static_cast<int>(parse_int(k, v));
             require(c.blobs_dim >= 1, k, "must be >= 1");
         }},
        {"blobs_spread", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.blobs_spread = parse_double(k, v);
             require(c.blobs_spread >= 0.0, k, "must be >= 0");
         }},
        {"blobs_test_per_class", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.blobs_test_per_class = static_cast<int>(parse_int(k, v));
             require(c.blobs_test_per_class >= 1, k, "must be >= 1");
         }},
        {"onedim_n", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.onedim_n = static_cast<int>(parse_int(k, v));
             require(c.onedim_n >= 1, k, "must be >= 1");
         }},
        {"idx_train_images", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.idx_train_images = v;
         }},
        {"idx_train_labels", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.idx_train_labels = v;
         }},
        {"idx_test_images", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.idx_test_images = v;
         }},
        {"idx_test_labels", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.idx_test_labels = v;
         }},
        {"cifar_train", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.cifar_train = v;
         }},
        {"cifar_test", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.cifar_test = v;
         }},
        {"out_dir", [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.out_dir = v;
         }},
        {"dump_images", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.dump_images = parse_bool(k, v);
         }},
        {"record_walltime", [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.record_walltime = parse_bool(k, v);
         }},
    };
    return reg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = key_registry().find(key);
        if (it == key_registry().end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        it->second(cfg, key, value);
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "protocol = " << c.protocol << "\n";
    os << "rounds = " << c.rounds << "\n";
    os << "clients = " << c.clients << "\n";
    os << "alpha = " << num(c.alpha) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "workers = " << c.workers << "\n";
    os << "ipc = " << c.ipc << "\n";
    os << "match_iters = " << c.match_iters << "\n";
    os << "client_lr = " << num(c.client_lr) << "\n";
    os << "real_batch = " << c.real_batch << "\n";
    os << "rho = " << num(c.rho) << "\n";
    os << "sigma = " << num(c.sigma) << "\n";
    os << "clip = " << num(c.clip) << "\n";
    os << "epsilon = " << num(c.epsilon) << "\n";
    os << "delta = " << num(c.delta) << "\n";
    os << "local_epochs = " << c.local_epochs << "\n";
    os << "local_lr = " << num(c.local_lr) << "\n";
    os << "mu = " << num(c.mu) << "\n";
    os << "server_lr = " << num(c.server_lr) << "\n";
    os << "server_epochs = " << c.server_epochs << "\n";
    os << "server_batch = " << c.server_batch << "\n";
    os << "model = " << c.model << "\n";
    os << "mlp_hidden = " << c.mlp_hidden << "\n";
    os << "conv_channels = " << c.conv_channels << "\n";
    os << "dataset = " << c.dataset << "\n";
    os << "blobs_per_class = " << c.blobs_per_class << "\n";
    os << "blobs_classes = " << c.blobs_classes << "\n";
    os << "blobs_dim = " << c.blobs_dim << "\n";
    os << "blobs_spread = " << num(c.blobs_spread) << "\n";
    os << "blobs_test_per_class = " << c.blobs_test_per_class << "\n";
    os << "onedim_n = " << c.onedim_n << "\n";
    os << "idx_train_images = " << c.idx_train_images << "\n";
    os << "idx_train_labels = " << c.idx_train_labels << "\n";
    os << "idx_test_images = " << c.idx_test_images << "\n";
    os << "idx_test_labels = " << c.idx_test_labels << "\n";
    os << "cifar_train = " << c.cifar_train << "\n";
    os << "cifar_test = " << c.cifar_test << "\n";
    os << "out_dir = " << c.out_dir << "\n";
    os << "dump_images = " << (c.dump_images ? "true" : "false") << "\n";
    os << "record_walltime = " << (c.record_walltime ? "true" : "false") << "\n";
    return os.str();
}

FedRunConfig ExperimentConfig::fed_config() const {
    FedRunConfig f;
    f.protocol = protocol_from_name(protocol);
    f.rounds = rounds;
    f.seed = seed;
    f.workers = workers;
    f.client.match_iters = match_iters;
    f.client.eta_c = client_lr;
    f.client.real_batch = real_batch;
    f.client.ipc = ipc;
    f.client.rho = rho;
    f.client.sigma = sigma;
    f.client.clip = clip;
    f.server.eta_s = server_lr;
    f.server.epochs = server_epochs;
    f.server.batch = server_batch;
    f.server.rho = rho;
    f.local_epochs = local_epochs;
    f.local_lr = local_lr;
    f.mu = mu;
    f.epsilon = epsilon;
    f.delta = delta;
    f.record_walltime = record_walltime;
    return f;
}

ExperimentData prepare_experiment(const ExperimentConfig& cfg) {
    ExperimentData ed;
    if (cfg.dataset == "blobs") {
        ed.train = gen_blobs(cfg.blobs_per_class, cfg.blobs_classes, cfg.blobs_dim,
                             cfg.blobs_spread, derive_seed({cfg.seed, 0x545241494eULL}));
        ed.test = gen_blobs(cfg.blobs_test_per_class, cfg.blobs_classes, cfg.blobs_dim,
                            cfg.blobs_spread, derive_seed({cfg.seed, 0x54455354ULL}));
    } else if (cfg.dataset == "onedim") {
        ed.train = gen_1d_binary(cfg.onedim_n, derive_seed({cfg.seed, 0x545241494eULL}));
        ed.test = gen_1d_binary(cfg.onedim_n, derive_seed({cfg.seed, 0x54455354ULL}));
    } else if (cfg.dataset == "idx") {
        if (cfg.idx_train_images.empty() || cfg.idx_train_labels.empty() ||
            cfg.idx_test_images.empty() || cfg.idx_test_labels.empty()) {
            throw ConfigError("dataset 'idx' requires idx_train_images, idx_train_labels, "
                              "idx_test_images and idx_test_labels");
        }
        ed.train = load_idx(cfg.idx_train_images, cfg.idx_train_labels);
        ed.test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
    } else {
        if (cfg.cifar_train.empty() || cfg.cifar_test.empty()) {
            throw ConfigError("dataset 'cifar' requires cifar_train and cifar_test");
        }
        ed.train = load_cifar_bin(cfg.cifar_train);
        ed.test = load_cifar_bin(cfg.cifar_test);
    }
    ed.test.num_classes = ed.train.num_classes = std::max(ed.train.num_classes, ed.test.num_classes);

    ed.partition = dirichlet_partition(ed.train.labels, cfg.clients, cfg.alpha, cfg.seed);

    ModelSpec spec;
    if (cfg.model == "logistic-1d") {
        if (ed.train.input_dim() != 1 || ed.train.num_classes != 2) {
            throw ConfigError("model 'logistic-1d' requires a 1-D binary dataset");
        }
        spec = Logistic1dSpec{};
    } else if (cfg.model == "mlp") {
        MlpSpec mlp;
        mlp.widths.push_back(ed.train.input_dim());
        for (int w : parse_int_list("mlp_hidden", cfg.mlp_hidden)) mlp.widths.push_back(w);
        mlp.widths.push_back(ed.train.num_classes);
        spec = mlp;
    } else {
        if (ed.train.example_shape.size() != 3) {
            throw ConfigError("model 'convnet-lite' requires an image dataset");
        }
        ConvNetLiteSpec cv;
        cv.in_ch = ed.train.example_shape[0];
        cv.height = ed.train.example_shape[1];
        cv.width = ed.train.example_shape[2];
        cv.channels = parse_int_list("conv_channels", cfg.conv_channels);
        cv.num_classes = ed.train.num_classes;
        spec = cv;
    }
    ed.prototype = Model::make(spec, derive_seed({cfg.seed, 0x4d4f44454cULL}));
    return ed;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    const ExperimentData ed = prepare_experiment(cfg);
    const RunResult result = run_protocol(cfg.fed_config(), ed.train, ed.partition, ed.test,
                                          ed.prototype);

    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream f(cfg.out_dir + "/history.csv", std::ios::binary);
        if (!f) throw DataError("cannot write " + cfg.out_dir + "/history.csv");
        f << result.history.csv();
    }
    {
        std::ofstream f(cfg.out_dir + "/manifest.cfg", std::ios::binary);
        if (!f) throw DataError("cannot write " + cfg.out_dir + "/manifest.cfg");
        f << "# experiment manifest; rerun with: feddm run --config manifest.cfg\n";
        f << serialize_config(cfg);
    }
    if (cfg.dump_images && !result.final_synthetic.empty()) {
        dump_synthetic_images(result.final_synthetic, cfg.out_dir + "/synthetic");
    }
    return result;
}

}  // namespace feddm

#include "feddm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "feddm/errors.hpp"

namespace feddm {

void Dataset::validate() const {
    const std::size_t expect = static_cast<std::size_t>(labels.size()) * input_dim();
    if (examples.size() != expect) {
        throw DataError("dataset '" + name + "': example/label count mismatch");
    }
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw DataError("dataset '" + name + "': label out of range");
        }
    }
}

std::vector<int> DatasetView::present_classes() const {
    std::set<int> s;
    for (int i : indices) s.insert(data->labels[i]);
    return {s.begin(), s.end()};
}

std::vector<double> DatasetView::gather(const std::vector<int>& view_positions) const {
    const int dim = data->input_dim();
    std::vector<double> out;
    out.reserve(view_positions.size() * static_cast<std::size_t>(dim));
    for (int p : view_positions) {
        const double* r = data->row(indices[p]);
        out.insert(out.end(), r, r + dim);
    }
    return out;
}

DatasetView full_view(const Dataset& d) {
    DatasetView v;
    v.data = &d;
    v.indices.resize(d.size());
    std::iota(v.indices.begin(), v.indices.end(), 0);
    return v;
}

int Partition::classes_at(const Dataset& d, int k) const {
    std::set<int> s;
    for (int i : index_sets[k]) s.insert(d.labels[i]);
    return static_cast<int>(s.size());
}

Dataset gen_1d_binary(int n, std::uint64_t seed) {
    if (n < 1) throw DataError("gen_1d_binary: n must be >= 1");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Dataset d;
    d.name = "1d-binary";
    d.example_shape = {1};
    d.num_classes = 2;
    d.examples.reserve(n);
    d.labels.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double x = gauss(rng);
        const double p = unif(rng);
        // sign labels with 10% flip noise: flip when (x >= 0 and p >= 0.9)
        // or (x < 0 and p < 0.1)
        const bool flip = (x >= 0.0) ? (p >= 0.9) : (p < 0.1);
        const int y = (x >= 0.0) != flip ? 1 : 0;
        d.examples.push_back(x);
        d.labels.push_back(y);
    }
    return d;
}

Dataset gen_blobs(int n_per_class, int num_classes, int dim, double spread,
                  std::uint64_t seed) {
    if (n_per_class < 1 || num_classes < 1 || dim < 1 || spread < 0.0) {
        throw DataError("gen_blobs: all arguments must be positive");
    }
    // Center for class c sits on axis (c mod dim), magnitude growing and sign
    // alternating with c / dim, so centers are always distinct.
    auto center = [&](int c, std::vector<double>& out) {
        out.assign(dim, 0.0);
        const int axis = c % dim;
        const int level = c / dim;
        const double sign = (level % 2 == 0) ? 1.0 : -1.0;
        out[axis] = sign * 3.0 * (level / 2 + 1);
    };
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset d;
    d.name = "blobs";
    d.example_shape = {dim};
    d.num_classes = num_classes;
    std::vector<double> ctr;
    for (int c = 0; c < num_classes; ++c) {
        center(c, ctr);
        for (int i = 0; i < n_per_class; ++i) {
            for (int j = 0; j < dim; ++j) d.examples.push_back(ctr[j] + spread * gauss(rng));
            d.labels.push_back(c);
        }
    }
    return d;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) {
        throw DataError(path + ": truncated at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw DataError("cannot open IDX image file: " + images_path);
    const std::uint32_t magic_i = read_be32(fi, images_path, 0);
    if (magic_i != 0x00000803u) {
        throw DataError(images_path + ": bad IDX image magic");
    }
    const std::uint32_t n = read_be32(fi, images_path, 4);
    const std::uint32_t rows = read_be32(fi, images_path, 8);
    const std::uint32_t cols = read_be32(fi, images_path, 12);
    const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
    std::vector<unsigned char> buf(pixels);
    if (!fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels))) {
        throw DataError(images_path + ": truncated at byte offset " +
                        std::to_string(16 + fi.gcount()));
    }

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw DataError("cannot open IDX label file: " + labels_path);
    const std::uint32_t magic_l = read_be32(fl, labels_path, 0);
    if (magic_l != 0x00000801u) {
        throw DataError(labels_path + ": bad IDX label magic");
    }
    const std::uint32_t nl = read_be32(fl, labels_path, 4);
    if (nl != n) {
        throw DataError("IDX image/label count mismatch: " + std::to_string(n) + " vs " +
                        std::to_string(nl));
    }
    std::vector<unsigned char> lab(nl);
    if (!fl.read(reinterpret_cast<char*>(lab.data()), static_cast<std::streamsize>(nl))) {
        throw DataError(labels_path + ": truncated at byte offset " +
                        std::to_string(8 + fl.gcount()));
    }

    Dataset d;
    d.name = "idx";
    d.example_shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
    d.examples.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) d.examples[i] = buf[i] / 255.0;
    d.labels.assign(lab.begin(), lab.end());
    int max_label = 0;
    for (int y : d.labels) max_label = std::max(max_label, y);
    d.num_classes = max_label + 1;
    d.validate();
    return d;
}

void write_idx(const Dataset& d, const std::string& images_path,
               const std::string& labels_path) {
    if (d.example_shape.size() != 3 || d.example_shape[0] != 1) {
        throw DataError("write_idx: expected single-channel image dataset");
    }
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw DataError("cannot write IDX image file: " + images_path);
    write_be32(fi, 0x00000803u);
    write_be32(fi, static_cast<std::uint32_t>(d.size()));
    write_be32(fi, static_cast<std::uint32_t>(d.example_shape[1]));
    write_be32(fi, static_cast<std::uint32_t>(d.example_shape[2]));
    for (double v : d.examples) {
        const int b = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        fi.put(static_cast<char>(b));
    }
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw DataError("cannot write IDX label file: " + labels_path);
    write_be32(fl, 0x00000801u);
    write_be32(fl, static_cast<std::uint32_t>(d.size()));
    for (int y : d.labels) fl.put(static_cast<char>(y));
}

Dataset load_cifar_bin(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot open CIFAR binary file: " + path);
    const std::streamsize bytes = f.tellg();
    constexpr std::streamsize kRecord = 3073;  // 1 label byte + 3*32*32 pixels
    if (bytes % kRecord != 0) {
        throw DataError(path + ": file size " + std::to_string(bytes) +
                        " is not a multiple of " + std::to_string(kRecord));
    }
    const int n = static_cast<int>(bytes / kRecord);
    f.seekg(0);
    Dataset d;
    d.name = "cifar";
    d.example_shape = {3, 32, 32};
    d.examples.resize(static_cast<std::size_t>(n) * 3072);
    d.labels.resize(n);
    std::vector<unsigned char> rec(kRecord);
    for (int i = 0; i < n; ++i) {
        f.read(reinterpret_cast<char*>(rec.data()), kRecord);
        d.labels[i] = rec[0];
        for (int j = 0; j < 3072; ++j) {
            d.examples[static_cast<std::size_t>(i) * 3072 + j] = rec[1 + j] / 255.0;
        }
    }
    int max_label = 0;
    for (int y : d.labels) max_label = std::max(max_label, y);
    d.num_classes = max_label + 1;
    d.validate();
    return d;
}

namespace {

// Largest-remainder allocation of `total` items across quotas proportional
// to `weights`; guarantees the allocations sum to `total`.
std::vector<int> largest_remainder(const std::vector<double>& weights, int total) {
    const int k = static_cast<int>(weights.size());
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<int> alloc(k, 0);
    std::vector<std::pair<double, int>> rema(k);
    int assigned = 0;
    for (int i = 0; i < k; ++i) {
        const double exact = total * weights[i] / wsum;
        alloc[i] = static_cast<int>(std::floor(exact));
        assigned += alloc[i];
        rema[i] = {exact - alloc[i], i};
    }
    std::stable_sort(rema.begin(), rema.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int r = 0; r < total - assigned; ++r) alloc[rema[r].second] += 1;
    return alloc;
}

}  // namespace

Partition dirichlet_partition(const std::vector<int>& labels, int clients, double alpha,
                              std::uint64_t seed) {
    if (clients < 1) throw DataError("dirichlet_partition: need at least one client");
    if (!(alpha > 0.0)) throw DataError("dirichlet_partition: alpha must be positive");
    const int n = static_cast<int>(labels.size());
    if (n < clients) {
        throw DataError("dirichlet_partition: fewer examples than clients");
    }
    std::vector<std::vector<int>> by_class;
    for (int i = 0; i < n; ++i) {
        if (labels[i] >= static_cast<int>(by_class.size())) by_class.resize(labels[i] + 1);
        by_class[labels[i]].push_back(i);
    }

    Rng rng(derive_seed({seed, 0x44495243ULL}));
    std::gamma_distribution<double> gamma(alpha, 1.0);

    Partition part;
    part.alpha = alpha;
    part.seed = seed;
    constexpr int kMaxAttempts = 10;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        part.index_sets.assign(clients, {});
        for (auto& cls : by_class) {
            if (cls.empty()) continue;
            std::vector<int> idx(cls);
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<double> p(clients);
            double psum = 0.0;
            for (double& v : p) {
                v = gamma(rng);
                psum += v;
            }
            if (psum == 0.0) p.assign(clients, 1.0);  // extreme alpha underflow
            const std::vector<int> alloc = largest_remainder(p, static_cast<int>(idx.size()));
            int pos = 0;
            for (int k = 0; k < clients; ++k) {
                for (int t = 0; t < alloc[k]; ++t) part.index_sets[k].push_back(idx[pos++]);
            }
        }
        const bool ok = std::none_of(part.index_sets.begin(), part.index_sets.end(),
                                     [](const auto& s) { return s.empty(); });
        if (ok) return part;
    }
    // Bounded resampling failed; move one example from the largest client to
    // each empty one.
    for (auto& empty_set : part.index_sets) {
        if (!empty_set.empty()) continue;
        auto largest = std::max_element(
            part.index_sets.begin(), part.index_sets.end(),
            [](const auto& a, const auto& b) { return a.size() < b.size(); });
        empty_set.push_back(largest->back());
        largest->pop_back();
    }
    return part;
}

std::vector<int> sample_class_batch(const DatasetView& view, int cls, int size, Rng& rng) {
    std::vector<int> pool;
    for (int i = 0; i < view.size(); ++i) {
        if (view.label(i) == cls) pool.push_back(i);
    }
    if (pool.empty()) {
        throw DataError("sample_class_batch: class " + std::to_string(cls) +
                        " absent from the view");
    }
    const int m = static_cast<int>(pool.size());
    std::vector<int> batch;
    batch.reserve(size);
    if (m >= size) {
        // partial Fisher-Yates: sample `size` without replacement
        for (int i = 0; i < size; ++i) {
            std::uniform_int_distribution<int> pick(i, m - 1);
            std::swap(pool[i], pool[pick(rng)]);
            batch.push_back(pool[i]);
        }
    } else {
        batch = pool;
        std::uniform_int_distribution<int> pick(0, m - 1);
        while (static_cast<int>(batch.size()) < size) batch.push_back(pool[pick(rng)]);
    }
    return batch;
}

}  // namespace feddm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "feddm/rng.hpp"
#include "feddm/tensor.hpp"

namespace feddm {

// Labeled dataset; examples stored row-major, one flattened example per row.
struct Dataset {
    std::string name;
    Shape example_shape;           // e.g. {dim} for vectors, {c,h,w} for images
    int num_classes = 0;
    std::vector<double> examples;  // n x input_dim
    std::vector<int> labels;       // values in [0, num_classes)

    int input_dim() const { return static_cast<int>(numel(example_shape)); }
    int size() const { return static_cast<int>(labels.size()); }
    const double* row(int i) const { return examples.data() + static_cast<std::size_t>(i) * input_dim(); }
    void validate() const;  // throws DataError on invariant violations
};

// A subset of a dataset addressed by index list (one client's shard).
struct DatasetView {
    const Dataset* data = nullptr;
    std::vector<int> indices;

    int size() const { return static_cast<int>(indices.size()); }
    int label(int i) const { return data->labels[indices[i]]; }
    // Distinct classes present in the view, ascending.
    std::vector<int> present_classes() const;
    // Row-major matrix of the selected examples.
    std::vector<double> gather(const std::vector<int>& view_positions) const;
};

DatasetView full_view(const Dataset& d);

// Disjoint per-client index sets covering [0, n).
struct Partition {
    std::vector<std::vector<int>> index_sets;
    double alpha = 0.0;
    std::uint64_t seed = 0;

    int clients() const { return static_cast<int>(index_sets.size()); }
    DatasetView view(const Dataset& d, int k) const { return DatasetView{&d, index_sets[k]}; }
    // Distinct classes held by client k.
    int classes_at(const Dataset& d, int k) const;
};

// 1-D binary classification set: x ~ N(0,1), label sign(x) with 10% flips.
Dataset gen_1d_binary(int n, std::uint64_t seed);

// Gaussian clusters at distinct axis-aligned centers; balanced classes.
Dataset gen_blobs(int n_per_class, int num_classes, int dim, double spread,
                  std::uint64_t seed);

// IDX (MNIST-style) ingestion: big-endian magic, byte pixels scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& d, const std::string& images_path,
               const std::string& labels_path);

// CIFAR binary: per record 1 label byte + 3072 channel-major pixel bytes.
Dataset load_cifar_bin(const std::string& path);

// Class-wise Dirichlet allocation: per class, split that class's indices
// across K clients by proportions drawn from Dir(alpha * 1_K), with
// largest-remainder rounding. Every client ends up with >= 1 example.
Partition dirichlet_partition(const std::vector<int>& labels, int clients, double alpha,
                              std::uint64_t seed);

// Uniform class-c batch: without replacement, padding by resampling when the
// class holds fewer than `size` examples. Returns view positions.
std::vector<int> sample_class_batch(const DatasetView& view, int cls, int size, Rng& rng);

}  // namespace feddm

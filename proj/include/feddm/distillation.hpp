#pragma once

#include <cstdint>
#include <vector>

#include "feddm/data.hpp"
#include "feddm/model.hpp"
#include "feddm/numerics.hpp"
#include "feddm/tensor.hpp"

namespace feddm {

// Per-client learnable examples with fixed labels; ipc examples per class
// actually present in the client's real data.
struct SyntheticSet {
    int client_id = 0;
    int ipc = 0;
    Shape example_shape;
    std::vector<int> classes;      // present classes, ascending
    std::vector<double> values;    // (classes.size()*ipc) x input_dim, grouped by class
    std::vector<int> labels;       // immutable, aligned with values rows

    int input_dim() const { return static_cast<int>(numel(example_shape)); }
    int size() const { return static_cast<int>(labels.size()); }
    // Rows belonging to class slot `ci` (index into `classes`).
    std::vector<double> class_values(int ci) const;
    void set_class_values(int ci, const std::vector<double>& v);
};

struct ClientConfig {
    int match_iters = 1000;   // T
    double eta_c = 1.0;
    int real_batch = 256;
    int ipc = 10;
    double rho = 5.0;
    double sigma = 0.0;       // DP noise multiplier; 0 disables the DP branch
    double clip = 5.0;        // per-example gradient norm bound

    void validate() const;  // throws ConfigError
};

// A class-c real mini-batch as a dense matrix.
struct ClassBatch {
    int label = 0;
    int count = 0;
    std::vector<double> x;  // count x input_dim
};

// ipc real examples per present class, copied as the initial synthetic data.
SyntheticSet init_synthetic(const DatasetView& client_data, int ipc, std::uint64_t seed);

// Sum over classes of squared differences of embedding and logit means
// between real batches and the synthetic class sets. Differentiable w.r.t.
// the synthetic inputs only. Returned tensors in `syn_inputs` (one per
// class slot of `syn`) carry gradients after backward(loss).
struct DmLossGraph {
    Tensor loss;
    std::vector<Tensor> syn_inputs;
};
DmLossGraph build_dm_loss(const Model& model_at_w,
                          const std::vector<ClassBatch>& real_batches,
                          const SyntheticSet& syn);

double dm_loss(const Model& model_at_w, const std::vector<ClassBatch>& real_batches,
               const SyntheticSet& syn);

// Gradient of the class-c matching loss w.r.t. the full synthetic set,
// flattened in syn row order. Rows of other classes receive zeros.
std::vector<double> dm_loss_grad(const Model& model_at_w,
                                 const std::vector<ClassBatch>& real_batches,
                                 const SyntheticSet& syn);

// The per-real-example gradients g~(x_i) of the class-c loss w.r.t. that
// class's synthetic inputs: the loss with the real-batch means replaced by
// the single example's features. Their mean equals the full class gradient.
std::vector<std::vector<double>> per_example_grads(const Model& model_at_w,
                                                   const ClassBatch& real_batch,
                                                   const SyntheticSet& syn);

// Algorithm: T iterations of { sample w in the rho-ball of w_r, sample
// per-class real batches, take one SGD step on the synthetic inputs },
// with per-example clipping plus Gaussian noise when sigma > 0.
SyntheticSet client_update(const DatasetView& client_data, const ParamVector& w_r,
                           const Model& prototype, const ClientConfig& cfg,
                           std::uint64_t seed);

}  // namespace feddm

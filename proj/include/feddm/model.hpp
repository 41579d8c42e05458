#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "feddm/data.hpp"
#include "feddm/numerics.hpp"
#include "feddm/tensor.hpp"

namespace feddm {

// Single-weight sigmoid classifier on scalar inputs; logits are [0, w*x] so
// softmax cross-entropy coincides with sigmoid BCE.
struct Logistic1dSpec {};

// Fully connected net with ReLU; widths = [input, hidden..., classes].
struct MlpSpec {
    std::vector<int> widths;
};

// Three conv3x3+ReLU+avgpool blocks and a linear head.
struct ConvNetLiteSpec {
    int in_ch = 1;
    int height = 28;
    int width = 28;
    std::vector<int> channels = {8, 16, 16};
    int num_classes = 10;
};

using ModelSpec = std::variant<Logistic1dSpec, MlpSpec, ConvNetLiteSpec>;

// One tape-connected forward pass. `embed` is the activation entering the
// final linear layer, `logits` its output.
struct ForwardPass {
    Tensor input;
    std::vector<Tensor> params;
    Tensor embed;
    Tensor logits;
};

class Model {
  public:
    static Model make(const ModelSpec& spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }
    int param_count() const { return static_cast<int>(params_.size()); }
    int num_classes() const { return num_classes_; }
    int embed_dim() const { return embed_dim_; }
    int input_dim() const { return input_dim_; }

    const ParamVector& params() const { return params_; }
    void set_params(ParamVector p);

    // batch: row-major (batch_n x input_dim). Gradients flow to whichever of
    // params / input is requested.
    ForwardPass forward(const std::vector<double>& batch, int batch_n,
                        bool params_grad, bool input_grad) const;

    // Flat gradient over all trainable parameters after backward().
    ParamVector collect_param_grads(const ForwardPass& fp) const;

    // Plain (tape-free) logits for evaluation.
    std::vector<double> eval_logits(const std::vector<double>& batch, int batch_n) const;

    // Fraction of argmax-correct predictions; ties break toward the lowest
    // class index.
    double accuracy(const Dataset& dataset) const;

  private:
    ModelSpec spec_;
    ParamVector params_;
    int num_classes_ = 0;
    int embed_dim_ = 0;
    int input_dim_ = 0;
};

// Convenience: descriptor -> expected trainable parameter count.
int param_count(const ModelSpec& spec);

}  // namespace feddm

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace feddm {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& shape);

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

// One node of the gradient tape. The tape is rebuilt per forward pass;
// backward() walks it in reverse topological order.
struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily, only when requires_grad
    bool requires_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(TensorNode&)> backward;
};

// Value-semantics handle to a tape node.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    // Leaf constructors. constants never receive gradients; variables do.
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor variable(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(node_->value.size()); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<double>& values() const { return node_->value; }
    const std::vector<double>& grad() const;
    double item() const;  // scalar tensors only

    NodePtr node() const { return node_; }

  private:
    NodePtr node_;
};

// Elementwise and matrix ops. All propagate requires_grad from inputs.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);       // (m,k) x (k,n)
Tensor add_rowvec(const Tensor& a, const Tensor& bias);  // (m,n) + (n)
Tensor relu(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // (m,n) -> (n)
Tensor sum(const Tensor& a);        // -> scalar
Tensor sqnorm(const Tensor& a);     // sum of squares -> scalar
Tensor hstack(const Tensor& a, const Tensor& b);  // (m,p)|(m,q) -> (m,p+q)

// 2-D convolution over row-major (n, in_ch*h*w) batches, stride 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              int in_ch, int h, int wdt, int out_ch, int k, int pad);
// 2x2 average pooling, stride 2, floor semantics on odd sizes.
Tensor avgpool2(const Tensor& x, int ch, int h, int wdt);

// Weighted softmax cross-entropy: sum_i weights[i] * ce_i. Pass weights
// summing to 1 for a mean. Empty weights -> uniform 1/n.
Tensor softmax_xent(const Tensor& logits, const std::vector<int>& labels,
                    const std::vector<double>& weights = {});

// Reverse-mode sweep from a scalar loss. Grads of reachable nodes are
// zeroed first, so a tape may be swept repeatedly.
void backward(const Tensor& loss);

// Gradient of a scalar loss w.r.t. a list of variables. Variables the loss
// does not depend on get zero gradients; non-variables are an error.
std::vector<double> grad_of(const Tensor& loss, const std::vector<Tensor>& params);

// Throws NumericsError when t holds a NaN or Inf.
void check_finite(const Tensor& t, const char* what);
void check_finite(const std::vector<double>& v, const char* what);

}  // namespace feddm

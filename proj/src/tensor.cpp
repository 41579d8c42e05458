#include "feddm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "feddm/errors.hpp"

namespace feddm {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

namespace {

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel(shape) != static_cast<std::int64_t>(values.size())) {
        throw NumericsError("tensor value count does not match shape");
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return n;
}

NodePtr make_op(Shape shape, std::vector<double> values, std::vector<NodePtr> parents,
                std::function<void(TensorNode&)> backward) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = false;
    for (const auto& p : parents) {
        if (p->requires_grad) n->requires_grad = true;
    }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return n;
}

void ensure_grad(TensorNode& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw NumericsError(std::string(op) + ": shape mismatch");
    }
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::variable(Shape shape, std::vector<double> values) {
    return Tensor(make_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)), 0.0);
    return Tensor(make_leaf(std::move(shape), std::move(v), requires_grad));
}

Tensor Tensor::scalar(double v) { return Tensor(make_leaf({}, {v}, false)); }

const std::vector<double>& Tensor::grad() const {
    if (!node_->requires_grad) {
        throw NumericsError("grad requested on a tensor that does not require grad");
    }
    ensure_grad(*node_);
    return node_->grad;
}

double Tensor::item() const {
    if (node_->value.size() != 1) throw NumericsError("item() on non-scalar tensor");
    return node_->value[0];
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
    return Tensor(make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        for (auto& p : n.parents) {
            if (!p->requires_grad) continue;
            ensure_grad(*p);
            for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
        }
    }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.values()[i];
    return Tensor(make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
        }
    }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.values());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.values()[i];
    return Tensor(make_op(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (std::size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->value[i];
        }
    }));
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.values());
    for (double& v : out) v *= s;
    return Tensor(make_op(a.shape(), std::move(out), {a.node()}, [s](TensorNode& n) {
        auto& p = n.parents[0];
        ensure_grad(*p);
        for (std::size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i] * s;
    }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw NumericsError("matmul: incompatible shapes");
    }
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (int i = 0; i < m; ++i) {
        for (int t = 0; t < k; ++t) {
            const double ait = av[i * k + t];
            if (ait == 0.0) continue;
            for (int j = 0; j < n; ++j) out[i * n + j] += ait * bv[t * n + j];
        }
    }
    return Tensor(make_op({m, n}, std::move(out), {a.node(), b.node()},
                          [m, k, n](TensorNode& nd) {
        auto& pa = nd.parents[0];
        auto& pb = nd.parents[1];
        if (pa->requires_grad) {
            ensure_grad(*pa);
            // dA = dC * B^T
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = nd.grad[i * n + j];
                    if (g == 0.0) continue;
                    for (int t = 0; t < k; ++t) pa->grad[i * k + t] += g * pb->value[t * n + j];
                }
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            // dB = A^T * dC
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    const double av = pa->value[i * k + t];
                    if (av == 0.0) continue;
                    for (int j = 0; j < n; ++j) pb->grad[t * n + j] += av * nd.grad[i * n + j];
                }
        }
    }));
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    if (a.shape().size() != 2 || bias.shape().size() != 1 || a.shape()[1] != bias.shape()[0]) {
        throw NumericsError("add_rowvec: incompatible shapes");
    }
    const int m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(a.values());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[i * n + j] += bias.values()[j];
    return Tensor(make_op(a.shape(), std::move(out), {a.node(), bias.node()},
                          [m, n](TensorNode& nd) {
        auto& pa = nd.parents[0];
        auto& pb = nd.parents[1];
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (std::size_t i = 0; i < nd.grad.size(); ++i) pa->grad[i] += nd.grad[i];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) pb->grad[j] += nd.grad[i * n + j];
        }
    }));
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.values());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return Tensor(make_op(a.shape(), std::move(out), {a.node()}, [](TensorNode& n) {
        auto& p = n.parents[0];
        ensure_grad(*p);
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (p->value[i] > 0.0) p->grad[i] += n.grad[i];
        }
    }));
}

Tensor mean_rows(const Tensor& a) {
    if (a.shape().size() != 2) throw NumericsError("mean_rows: expected 2-d tensor");
    const int m = a.shape()[0], n = a.shape()[1];
    if (m == 0) throw NumericsError("mean_rows: empty tensor");
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j] += a.values()[i * n + j];
    for (double& v : out) v /= m;
    return Tensor(make_op({n}, std::move(out), {a.node()}, [m, n](TensorNode& nd) {
        auto& p = nd.parents[0];
        ensure_grad(*p);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) p->grad[i * n + j] += nd.grad[j] / m;
    }));
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return Tensor(make_op({}, {s}, {a.node()}, [](TensorNode& nd) {
        auto& p = nd.parents[0];
        ensure_grad(*p);
        for (double& g : p->grad) g += nd.grad[0];
    }));
}

Tensor sqnorm(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v * v;
    return Tensor(make_op({}, {s}, {a.node()}, [](TensorNode& nd) {
        auto& p = nd.parents[0];
        ensure_grad(*p);
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += 2.0 * p->value[i] * nd.grad[0];
    }));
}

Tensor hstack(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0]) {
        throw NumericsError("hstack: incompatible shapes");
    }
    const int m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m) * (p + q));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p; ++j) out[i * (p + q) + j] = a.values()[i * p + j];
        for (int j = 0; j < q; ++j) out[i * (p + q) + p + j] = b.values()[i * q + j];
    }
    return Tensor(make_op({m, p + q}, std::move(out), {a.node(), b.node()},
                          [m, p, q](TensorNode& nd) {
        auto& pa = nd.parents[0];
        auto& pb = nd.parents[1];
        if (pa->requires_grad) {
            ensure_grad(*pa);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < p; ++j) pa->grad[i * p + j] += nd.grad[i * (p + q) + j];
        }
        if (pb->requires_grad) {
            ensure_grad(*pb);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < q; ++j) pb->grad[i * q + j] += nd.grad[i * (p + q) + p + j];
        }
    }));
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              int in_ch, int h, int wdt, int out_ch, int k, int pad) {
    const std::int64_t plane = static_cast<std::int64_t>(in_ch) * h * wdt;
    if (x.shape().size() != 2 || x.shape()[1] != plane) {
        throw NumericsError("conv2d: input shape mismatch");
    }
    if (w.size() != static_cast<std::int64_t>(out_ch) * in_ch * k * k ||
        b.size() != out_ch) {
        throw NumericsError("conv2d: weight shape mismatch");
    }
    const int n = x.shape()[0];
    const int oh = h + 2 * pad - k + 1;
    const int ow = wdt + 2 * pad - k + 1;
    std::vector<double> out(static_cast<std::size_t>(n) * out_ch * oh * ow, 0.0);
    const auto& xv = x.values();
    const auto& wv = w.values();
    const auto& bv = b.values();
    for (int img = 0; img < n; ++img) {
        const double* xp = xv.data() + img * plane;
        double* op = out.data() + static_cast<std::size_t>(img) * out_ch * oh * ow;
        for (int oc = 0; oc < out_ch; ++oc) {
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bv[oc];
                    for (int ic = 0; ic < in_ch; ++ic)
                        for (int ky = 0; ky < k; ++ky) {
                            const int iy = oy + ky - pad;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ix = ox + kx - pad;
                                if (ix < 0 || ix >= wdt) continue;
                                acc += xp[(ic * h + iy) * wdt + ix] *
                                       wv[((oc * in_ch + ic) * k + ky) * k + kx];
                            }
                        }
                    op[(oc * oh + oy) * ow + ox] = acc;
                }
        }
    }
    return Tensor(make_op({n, out_ch * oh * ow}, std::move(out),
                          {x.node(), w.node(), b.node()},
                          [n, in_ch, h, wdt, out_ch, k, pad, oh, ow, plane](TensorNode& nd) {
        auto& px = nd.parents[0];
        auto& pw = nd.parents[1];
        auto& pb = nd.parents[2];
        if (px->requires_grad) ensure_grad(*px);
        if (pw->requires_grad) ensure_grad(*pw);
        if (pb->requires_grad) ensure_grad(*pb);
        for (int img = 0; img < n; ++img) {
            const double* xp = px->value.data() + img * plane;
            const double* gp = nd.grad.data() + static_cast<std::size_t>(img) * out_ch * oh * ow;
            double* gxp = px->requires_grad ? px->grad.data() + img * plane : nullptr;
            for (int oc = 0; oc < out_ch; ++oc) {
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const double g = gp[(oc * oh + oy) * ow + ox];
                        if (g == 0.0) continue;
                        if (pb->requires_grad) pb->grad[oc] += g;
                        for (int ic = 0; ic < in_ch; ++ic)
                            for (int ky = 0; ky < k; ++ky) {
                                const int iy = oy + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                for (int kx = 0; kx < k; ++kx) {
                                    const int ix = ox + kx - pad;
                                    if (ix < 0 || ix >= wdt) continue;
                                    const std::size_t wi = ((static_cast<std::size_t>(oc) * in_ch + ic) * k + ky) * k + kx;
                                    const std::size_t xi = (static_cast<std::size_t>(ic) * h + iy) * wdt + ix;
                                    if (pw->requires_grad) pw->grad[wi] += g * xp[xi];
                                    if (gxp) gxp[xi] += g * pw->value[wi];
                                }
                            }
                    }
            }
        }
    }));
}

Tensor avgpool2(const Tensor& x, int ch, int h, int wdt) {
    if (x.shape().size() != 2 || x.shape()[1] != static_cast<std::int64_t>(ch) * h * wdt) {
        throw NumericsError("avgpool2: input shape mismatch");
    }
    const int n = x.shape()[0];
    const int oh = h / 2, ow = wdt / 2;
    if (oh == 0 || ow == 0) throw NumericsError("avgpool2: spatial size too small");
    std::vector<double> out(static_cast<std::size_t>(n) * ch * oh * ow, 0.0);
    const auto& xv = x.values();
    for (int img = 0; img < n; ++img)
        for (int c = 0; c < ch; ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            acc += xv[((static_cast<std::size_t>(img) * ch + c) * h + 2 * oy + dy) * wdt + 2 * ox + dx];
                    out[((static_cast<std::size_t>(img) * ch + c) * oh + oy) * ow + ox] = acc / 4.0;
                }
    return Tensor(make_op({n, ch * oh * ow}, std::move(out), {x.node()},
                          [n, ch, h, wdt, oh, ow](TensorNode& nd) {
        auto& p = nd.parents[0];
        ensure_grad(*p);
        for (int img = 0; img < n; ++img)
            for (int c = 0; c < ch; ++c)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        const double g = nd.grad[((static_cast<std::size_t>(img) * ch + c) * oh + oy) * ow + ox] / 4.0;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx)
                                p->grad[((static_cast<std::size_t>(img) * ch + c) * h + 2 * oy + dy) * wdt + 2 * ox + dx] += g;
                    }
    }));
}

Tensor softmax_xent(const Tensor& logits, const std::vector<int>& labels,
                    const std::vector<double>& weights) {
    if (logits.shape().size() != 2) throw NumericsError("softmax_xent: expected 2-d logits");
    const int n = logits.shape()[0], c = logits.shape()[1];
    if (static_cast<int>(labels.size()) != n) {
        throw NumericsError("softmax_xent: label count mismatch");
    }
    if (!weights.empty() && static_cast<int>(weights.size()) != n) {
        throw NumericsError("softmax_xent: weight count mismatch");
    }
    auto weight_at = [&](int i) { return weights.empty() ? 1.0 / n : weights[i]; };
    const auto& zv = logits.values();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= c) throw NumericsError("softmax_xent: label out of range");
        double zmax = zv[i * c];
        for (int j = 1; j < c; ++j) zmax = std::max(zmax, zv[i * c + j]);
        double se = 0.0;
        for (int j = 0; j < c; ++j) se += std::exp(zv[i * c + j] - zmax);
        loss += weight_at(i) * (std::log(se) + zmax - zv[i * c + labels[i]]);
    }
    return Tensor(make_op({}, {loss}, {logits.node()},
                          [n, c, labels, weights](TensorNode& nd) {
        auto& p = nd.parents[0];
        ensure_grad(*p);
        const double g = nd.grad[0];
        for (int i = 0; i < n; ++i) {
            double zmax = p->value[i * c];
            for (int j = 1; j < c; ++j) zmax = std::max(zmax, p->value[i * c + j]);
            double se = 0.0;
            for (int j = 0; j < c; ++j) se += std::exp(p->value[i * c + j] - zmax);
            const double wi = (weights.empty() ? 1.0 / n : weights[i]) * g;
            for (int j = 0; j < c; ++j) {
                const double soft = std::exp(p->value[i * c + j] - zmax) / se;
                p->grad[i * c + j] += wi * (soft - (j == labels[i] ? 1.0 : 0.0));
            }
        }
    }));
}

namespace {

void collect_topo(const NodePtr& root, std::vector<TensorNode*>& order) {
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
}

}  // namespace

void backward(const Tensor& loss) {
    if (loss.size() != 1) throw NumericsError("backward: loss must be a scalar");
    if (!loss.requires_grad()) return;
    std::vector<TensorNode*> order;  // post-order: parents before children
    collect_topo(loss.node(), order);
    for (TensorNode* n : order) n->grad.assign(n->value.size(), 0.0);
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

std::vector<double> grad_of(const Tensor& loss, const std::vector<Tensor>& params) {
    if (loss.size() != 1) throw NumericsError("grad_of: loss must be a scalar");
    for (const auto& p : params) {
        if (!p.requires_grad()) throw NumericsError("grad_of: parameter is not on the tape");
        p.node()->grad.assign(p.node()->value.size(), 0.0);
    }
    if (loss.requires_grad()) {
        backward(loss);
    }
    std::vector<double> out;
    for (const auto& p : params) {
        const auto& g = p.node()->grad;
        if (g.empty()) {
            out.insert(out.end(), static_cast<std::size_t>(p.size()), 0.0);
        } else {
            out.insert(out.end(), g.begin(), g.end());
        }
    }
    return out;
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericsError(std::string("non-finite value in ") + what);
        }
    }
}

void check_finite(const Tensor& t, const char* what) { check_finite(t.values(), what); }

}  // namespace feddm

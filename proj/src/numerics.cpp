#include "feddm/numerics.hpp"

#include <cmath>

#include "feddm/errors.hpp"

namespace feddm {

double l2_norm(const ParamVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr) {
    if (params.size() != grads.size()) throw NumericsError("sgd_step: dimension mismatch");
    if (!(lr > 0.0)) throw NumericsError("sgd_step: learning rate must be positive");
    ParamVector out(params);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * grads[i];
    return out;
}

ParamVector clip_by_norm(const ParamVector& g, double c) {
    if (!(c > 0.0)) throw NumericsError("clip_by_norm: bound must be positive");
    const double denom = std::max(1.0, l2_norm(g) / c);
    ParamVector out(g);
    for (double& x : out) x /= denom;
    return out;
}

ParamVector sample_ball_weight(const ParamVector& center, double rho, Rng& rng) {
    if (rho < 0.0) throw NumericsError("sample_ball_weight: rho must be non-negative");
    std::normal_distribution<double> unit(0.0, 1.0);
    ParamVector w(center);
    for (double& x : w) x += unit(rng);
    return project_ball(w, center, rho);
}

ParamVector sample_ball_weight(const ParamVector& center, double rho, std::uint64_t seed) {
    Rng rng(seed);
    return sample_ball_weight(center, rho, rng);
}

ParamVector project_ball(const ParamVector& w, const ParamVector& center, double rho) {
    if (rho < 0.0) throw NumericsError("project_ball: rho must be non-negative");
    if (w.size() != center.size()) throw NumericsError("project_ball: dimension mismatch");
    ParamVector d(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) d[i] = w[i] - center[i];
    const double norm = l2_norm(d);
    if (norm <= rho) return w;
    ParamVector out(center);
    if (norm > 0.0) {
        const double s = rho / norm;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * d[i];
    }
    return out;
}

ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& loss_fn,
                             const ParamVector& params, double step) {
    if (!(step > 0.0)) throw NumericsError("finite_diff_grad: step must be positive");
    ParamVector g(params.size());
    ParamVector p(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + step;
        const double hi = loss_fn(p);
        p[i] = orig - step;
        const double lo = loss_fn(p);
        p[i] = orig;
        g[i] = (hi - lo) / (2.0 * step);
    }
    return g;
}

}  // namespace feddm

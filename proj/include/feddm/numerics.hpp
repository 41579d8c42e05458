#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "feddm/rng.hpp"

namespace feddm {

// Flat view over a model's trainable parameters.
using ParamVector = std::vector<double>;

double l2_norm(const ParamVector& v);

// params - lr * grads, elementwise.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grads, double lr);

// g / max(1, ||g||_2 / c); output norm <= c.
ParamVector clip_by_norm(const ParamVector& g, double c);

// Draw each coordinate from Normal(center_i, 1), then radially project so
// ||w - center||_2 <= rho.
ParamVector sample_ball_weight(const ParamVector& center, double rho, Rng& rng);
ParamVector sample_ball_weight(const ParamVector& center, double rho, std::uint64_t seed);

// w unchanged when inside the ball, else center + rho * (w-center)/||w-center||.
ParamVector project_ball(const ParamVector& w, const ParamVector& center, double rho);

// Central-difference gradient estimate, the test oracle for autodiff.
ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& loss_fn,
                             const ParamVector& params, double step);

}  // namespace feddm

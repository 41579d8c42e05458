#pragma once

#include <vector>

namespace feddm {

struct DpBudget {
    double epsilon = 0.0;  // > 0
    double delta = 0.0;    // in (0,1)

    void validate() const;  // throws ConfigError
};

struct DpMechanismParams {
    double sigma = 0.0;
    double clip = 0.0;
    double sampling_rate = 0.0;  // q in (0,1]
    int steps = 1;               // T
};

// Gaussian mechanism calibration: sqrt(2 ln(1.25/delta)) / epsilon.
double gaussian_sigma(const DpBudget& budget);

// Tail-bound calibration sqrt(ln(delta) / (T q^2 - epsilon)); requires
// T q^2 < epsilon.
double tailbound_sigma(const DpBudget& budget, double q, int steps);

// Simplified form sqrt(2 ln(1/delta) / epsilon), valid when T q^2 <= eps/2.
double tailbound_sigma_simplified(const DpBudget& budget);

// true iff T q^2 <= epsilon / 2.
bool check_budget(double q, int steps, double epsilon);

// Parallel composition over disjoint datasets: coordinate-wise max.
DpBudget compose_parallel(const std::vector<DpBudget>& budgets);

}  // namespace feddm

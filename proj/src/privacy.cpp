#include "feddm/privacy.hpp"

#include <algorithm>
#include <cmath>

#include "feddm/errors.hpp"

namespace feddm {

void DpBudget::validate() const {
    if (!(epsilon > 0.0)) throw ConfigError("dp budget: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("dp budget: delta must be in (0,1)");
}

double gaussian_sigma(const DpBudget& budget) {
    if (!(budget.epsilon > 0.0)) throw ConfigError("gaussian_sigma: epsilon must be positive");
    if (!(budget.delta > 0.0 && budget.delta < 1.25)) {
        throw ConfigError("gaussian_sigma: delta out of range");
    }
    return std::sqrt(2.0 * std::log(1.25 / budget.delta)) / budget.epsilon;
}

double tailbound_sigma(const DpBudget& budget, double q, int steps) {
    budget.validate();
    const double tq2 = steps * q * q;
    if (!(tq2 < budget.epsilon)) {
        throw ConfigError("tailbound_sigma: requires T*q^2 < epsilon");
    }
    return std::sqrt(std::log(budget.delta) / (tq2 - budget.epsilon));
}

double tailbound_sigma_simplified(const DpBudget& budget) {
    budget.validate();
    return std::sqrt(2.0 * (-std::log(budget.delta)) / budget.epsilon);
}

bool check_budget(double q, int steps, double epsilon) {
    return steps * q * q <= epsilon / 2.0;
}

DpBudget compose_parallel(const std::vector<DpBudget>& budgets) {
    if (budgets.empty()) throw ConfigError("compose_parallel: empty budget list");
    DpBudget out = budgets.front();
    for (const DpBudget& b : budgets) {
        out.epsilon = std::max(out.epsilon, b.epsilon);
        out.delta = std::max(out.delta, b.delta);
    }
    return out;
}

}  // namespace feddm

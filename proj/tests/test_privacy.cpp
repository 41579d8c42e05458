#include <cmath>

#include "doctest.h"
#include "feddm/errors.hpp"
#include "feddm/privacy.hpp"

using namespace feddm;

TEST_SUITE("privacy") {

TEST_CASE("gaussian_sigma values") {
    CHECK(gaussian_sigma({1.0, 1e-5}) ==
          doctest::Approx(std::sqrt(2.0 * std::log(125000.0))).epsilon(1e-12));
    CHECK(gaussian_sigma({1.0, 1e-5}) == doctest::Approx(4.8455).epsilon(2.5e-4));
    // exact homogeneity: doubling epsilon halves sigma
    CHECK(gaussian_sigma({2.0, 1e-5}) == gaussian_sigma({1.0, 1e-5}) / 2.0);
    // delta -> 1.25 pushes sigma to zero
    CHECK(gaussian_sigma({1.0, 1.25 - 1e-12}) < 1e-5);
}

TEST_CASE("tailbound_sigma") {
    // at T q^2 = eps/2 the full bound collapses to the simplified one
    const DpBudget b{1.0, 1e-5};
    CHECK(tailbound_sigma(b, 0.25, 8) == tailbound_sigma_simplified(b));
    // direct evaluation away from the boundary
    CHECK(tailbound_sigma({2.0, 1e-5}, 0.01, 100) ==
          doctest::Approx(std::sqrt(std::log(1e-5) / (0.01 - 2.0))).epsilon(1e-12));
    CHECK(tailbound_sigma({2.0, 1e-5}, 0.01, 100) == doctest::Approx(2.4051).epsilon(1e-3));
    // sigma grows with T
    CHECK(tailbound_sigma(b, 0.05, 100) < tailbound_sigma(b, 0.05, 200));
    // T q^2 >= eps is out of the bound's domain
    CHECK_THROWS_AS((void)tailbound_sigma(b, 0.5, 8), ConfigError);
}

TEST_CASE("check_budget") {
    CHECK(check_budget(0.1, 50, 1.0));   // 0.5 <= 0.5
    CHECK(!check_budget(0.1, 51, 1.0));  // 0.51 > 0.5
    CHECK(check_budget(0.0, 1000000, 1.0));
}

TEST_CASE("compose_parallel") {
    const DpBudget a{1.0, 1e-5};
    const DpBudget c = compose_parallel({a, a, a});
    CHECK(c.epsilon == 1.0);
    CHECK(c.delta == 1e-5);
    const DpBudget m = compose_parallel({{1.0, 1e-5}, {2.0, 1e-6}});
    CHECK(m.epsilon == 2.0);
    CHECK(m.delta == 1e-5);
    const DpBudget s = compose_parallel({{3.0, 1e-7}});
    CHECK(s.epsilon == 3.0);
    CHECK(s.delta == 1e-7);
}

TEST_CASE("budget validation") {
    CHECK_THROWS_AS((DpBudget{0.0, 1e-5}).validate(), ConfigError);
    CHECK_THROWS_AS((DpBudget{1.0, 0.0}).validate(), ConfigError);
    CHECK_THROWS_AS((DpBudget{1.0, 1.0}).validate(), ConfigError);
}

}  // TEST_SUITE

#include <cmath>

#include "doctest.h"
#include "feddm/numerics.hpp"

using namespace feddm;

TEST_SUITE("numerics") {

TEST_CASE("sgd_step") {
    CHECK(sgd_step({1, 1}, {1, 2}, 0.5) == ParamVector{0.5, 0.0});
    CHECK(sgd_step({1, 1}, {0, 0}, 0.5) == ParamVector{1, 1});
    // two steps of lr=0.1 on f(w)=w^2 from w=1: grad 2w each step
    ParamVector w{1.0};
    w = sgd_step(w, {2 * w[0]}, 0.1);
    w = sgd_step(w, {2 * w[0]}, 0.1);
    CHECK(w[0] == doctest::Approx(0.64));
}

TEST_CASE("clip_by_norm") {
    CHECK(clip_by_norm({2, 0}, 5.0) == ParamVector{2, 0});  // norm 2 <= 5
    const auto g = clip_by_norm({3, 4}, 1.0);
    CHECK(g[0] == doctest::Approx(0.6));
    CHECK(g[1] == doctest::Approx(0.8));
    CHECK(clip_by_norm({0, 0, 0}, 1.0) == ParamVector{0, 0, 0});
}

TEST_CASE("sample_ball_weight") {
    const ParamVector center{1.0, -2.0, 0.5};
    CHECK(sample_ball_weight(center, 0.0, std::uint64_t{42}) == center);

    const ParamVector c10(10, 0.25);
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const ParamVector w = sample_ball_weight(c10, 5.0, rng);
        ParamVector d(w.size());
        for (std::size_t j = 0; j < w.size(); ++j) d[j] = w[j] - c10[j];
        CHECK(l2_norm(d) <= 5.0 + 1e-12);
    }
    CHECK(sample_ball_weight(center, 5.0, std::uint64_t{9}) ==
          sample_ball_weight(center, 5.0, std::uint64_t{9}));
}

TEST_CASE("project_ball") {
    const ParamVector center{0, 0};
    CHECK(project_ball({0.5, 0.5}, center, 1.0) == ParamVector{0.5, 0.5});
    const auto p = project_ball({3, 4}, center, 1.0);
    CHECK(p[0] == doctest::Approx(0.6));
    CHECK(p[1] == doctest::Approx(0.8));
    CHECK(project_ball(p, center, 1.0) == p);  // idempotent
}

TEST_CASE("finite_diff_grad") {
    const auto square = [](const ParamVector& w) { return w[0] * w[0]; };
    CHECK(finite_diff_grad(square, {3.0}, 1e-5)[0] == doctest::Approx(6.0).epsilon(1e-6));
    const auto absf = [](const ParamVector& w) { return std::abs(w[0]); };
    CHECK(finite_diff_grad(absf, {0.0}, 1e-5)[0] == doctest::Approx(0.0));
}

}  // TEST_SUITE

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvarsmd/error.hpp"
#include "cvarsmd/rng.hpp"
#include "cvarsmd/simplex.hpp"
#include "oracles.hpp"

#include <cmath>
#include <limits>
#include <random>

using namespace cvarsmd;

TEST_CASE("SimplexVector construction") {
    const auto u = SimplexVector::uniform(4);
    CHECK(u.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(u[i] == 0.25);
    CHECK(u.min_weight() == 0.25);
    CHECK_NOTHROW(SimplexVector::from_weights({0.2, 0.8}));
    CHECK_THROWS_AS(SimplexVector::from_weights({0.2, 0.7}), Error);
    CHECK_THROWS_AS(SimplexVector::from_weights({-0.2, 1.2}), Error);
    const auto n = SimplexVector::normalized({1.0, 3.0});
    CHECK(n[0] == 0.25);
    CHECK(n[1] == 0.75);
    CHECK_THROWS_AS(SimplexVector::normalized({0.0, 0.0}), Error);
}

TEST_CASE("projection of a feasible point is the point itself") {
    const std::vector<double> y{0.1, 0.2, 0.3, 0.4};
    CHECK(simplex_project(y).vector() == y);
}

TEST_CASE("projection by symmetry and at the boundary") {
    const auto w = simplex_project(std::vector<double>{1.0, 1.0});
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.5));
    const auto c = simplex_project(std::vector<double>{0.0, 2.0});
    CHECK(c[0] == 0.0);
    CHECK(c[1] == 1.0);
}

TEST_CASE("projection rejects non-finite input") {
    try {
        simplex_project(std::vector<double>{0.5, std::numeric_limits<double>::quiet_NaN()});
        FAIL("expected NonFiniteInput");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFiniteInput);
    }
    CHECK_THROWS_AS(simplex_project(std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}), Error);
}

TEST_CASE("projection matches brute-force support enumeration") {
    Engine rng(2718);
    std::uniform_int_distribution<int> dim(1, 8);
    std::normal_distribution<double> normal(0.0, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> y(static_cast<std::size_t>(dim(rng)));
        for (double& v : y) v = normal(rng);
        const auto got = simplex_project(y);
        const auto want = oracle::brute_force_simplex_projection(y);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-10);
    }
}

TEST_CASE("property: projection is exactly idempotent and lands on the simplex") {
    Engine rng(99);
    std::uniform_int_distribution<int> dim(1, 40);
    std::normal_distribution<double> normal(0.0, 5.0);
    for (int trial = 0; trial < 5000; ++trial) {
        std::vector<double> y(static_cast<std::size_t>(dim(rng)));
        for (double& v : y) v = normal(rng);
        const auto w = simplex_project(y);
        CHECK(on_simplex(w.weights(), 1e-12));
        const auto again = simplex_project(w.weights());
        CHECK(again == w);
    }
}

TEST_CASE("projection of a shifted feasible point subtracts the mean shift") {
    const std::vector<double> w{0.3, 0.3, 0.4};
    const std::vector<double> g{0.01, -0.02, 0.005};
    std::vector<double> y(3);
    double mean = 0.0;
    for (double v : g) mean += v / 3.0;
    for (std::size_t i = 0; i < 3; ++i) y[i] = w[i] - g[i];
    const auto p = simplex_project(y);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(w[i] - (g[i] - mean)).epsilon(1e-14));
}

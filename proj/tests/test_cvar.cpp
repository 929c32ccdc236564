#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvarsmd/cvar.hpp"
#include "cvarsmd/error.hpp"
#include "cvarsmd/rng.hpp"
#include "cvarsmd/sampler.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace cvarsmd;

namespace {

SampleBatch constant_batch(std::vector<double> z, std::size_t n) {
    SampleBatch b(z.size());
    for (std::size_t i = 0; i < n; ++i) b.push_back(z);
    return b;
}

SampleBatch normal_batch(std::size_t n, std::uint64_t seed) {
    SampleBatch b(1);
    b.resize(n);
    Engine rng(seed);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < n; ++i) b.row(i)[0] = normal(rng);
    return b;
}

SampleBatch draw_batch(const ReturnSampler& s, std::size_t n, std::uint64_t seed) {
    SampleBatch b(s.dim());
    b.resize(n);
    Engine rng(seed);
    for (std::size_t i = 0; i < n; ++i) s.draw(rng, 1, b.row(i));
    return b;
}

const std::vector<double> one{1.0};

} // namespace

TEST_CASE("psi on a point mass at the threshold") {
    const auto b = constant_batch({0.1, 0.3}, 10);
    const std::vector<double> u{0.25, 0.75};
    const double s = 0.25 * 0.1 + 0.75 * 0.3;
    RiskConfig cfg{0.05, 1.0};
    CHECK(psi(s, u, b, cfg) == doctest::Approx(s));
    CHECK(psi(1e6, u, b, cfg) == doctest::Approx(1e6));
    CHECK(p_lambda(u, s, b, cfg) == doctest::Approx((cfg.lambda - 1.0) * s));
    cfg.lambda = 0.0;
    CHECK(p_lambda(u, 3.0, b, cfg) == doctest::Approx(-s));
}

TEST_CASE("psi and p_lambda reject empty batches") {
    const SampleBatch empty(2);
    const std::vector<double> u{0.5, 0.5};
    const RiskConfig cfg;
    try {
        psi(0.0, u, empty, cfg);
        FAIL("expected EmptyBatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyBatch);
    }
    CHECK_THROWS_AS(p_lambda(u, 0.0, empty, cfg), Error);
}

TEST_CASE("psi against the Gaussian closed form and quadrature") {
    const auto b = normal_batch(1000000, 1);
    const RiskConfig cfg{0.95, 1.0};
    const double q = oracle::normal_quantile(0.95);
    CHECK(q == doctest::Approx(1.6449).epsilon(1e-4));
    const double value = psi(q, one, b, cfg);
    const double closed = q + oracle::gaussian_excess_numeric(0.0, 1.0, q) / 0.05;
    CHECK(closed == doctest::Approx(2.0627).epsilon(1e-4));
    std::vector<double> terms(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) terms[i] = q + std::max(0.0, b.row(i)[0] - q) / 0.05;
    CHECK(std::abs(value - closed) <= 3.0 * oracle::moments(terms).se);
    CHECK(gaussian_psi(0.0, 1.0, q, 0.95) == doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("gaussian_psi matches quadrature off the optimum") {
    for (double theta : {-1.0, 0.0, 0.3, 2.5})
        for (double alpha : {0.05, 0.5, 0.9}) {
            const double expected = theta + oracle::gaussian_excess_numeric(0.4, 1.3, theta) / (1.0 - alpha);
            CHECK(gaussian_psi(0.4, 1.3, theta, alpha) == doctest::Approx(expected).epsilon(1e-9));
        }
    CHECK(gaussian_psi(0.4, 0.0, 0.1, 0.3) == doctest::Approx(0.1 + 0.3 / 0.7));
}

TEST_CASE("gaussian_cvar_oracle") {
    const auto d = gaussian_cvar_oracle(0.3, 0.0, 0.9);
    CHECK(d.var == 0.3);
    CHECK(d.cvar == 0.3);
    const auto half = gaussian_cvar_oracle(0.0, 1.0, 0.5);
    CHECK(half.var == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(half.cvar == doctest::Approx(0.7979).epsilon(1e-4));
    CHECK(half.cvar == doctest::Approx(oracle::gaussian_excess_numeric(0.0, 1.0, 0.0) / 0.5).epsilon(1e-9));
    const auto tail = gaussian_cvar_oracle(0.0, 1.0, 0.95);
    CHECK(tail.var == doctest::Approx(1.6449).epsilon(1e-4));
    CHECK(tail.cvar == doctest::Approx(2.0627).epsilon(1e-4));
    CHECK(tail.var == doctest::Approx(oracle::normal_quantile(0.95)).epsilon(1e-10));
    const auto shifted = gaussian_cvar_oracle(1.0, 2.0, 0.95);
    CHECK(shifted.cvar == doctest::Approx(1.0 + 2.0 * tail.cvar).epsilon(1e-12));
}

TEST_CASE("subgradient formula") {
    const std::vector<double> u{0.5, 0.5};
    const std::vector<double> z{0.2, -0.4};
    RiskConfig cfg{0.1, 0.0};
    auto g = subgradient(u, 0.0, z, cfg);
    CHECK(g.g_u[0] == doctest::Approx(-0.2));
    CHECK(g.g_u[1] == doctest::Approx(0.4));
    CHECK(g.g_theta == 0.0);

    cfg.lambda = 2.0;
    g = subgradient(u, 0.5, z, cfg); // <z,u> = -0.1 < 0.5
    CHECK(g.g_u[0] == doctest::Approx(-0.2));
    CHECK(g.g_theta == doctest::Approx(2.0));

    g = subgradient(u, -0.1, z, cfg); // tie counts as in the tail
    CHECK(g.g_u[0] == doctest::Approx(-0.2 + 2.0 / 0.9 * 0.2));
    CHECK(g.g_u[1] == doctest::Approx(0.4 - 2.0 / 0.9 * 0.4));
    CHECK(g.g_theta == doctest::Approx(2.0 * (1.0 - 1.0 / 0.9)));
}

TEST_CASE("subgradient under negated returns flips the tail term only") {
    const std::vector<double> u{0.5, 0.5};
    const std::vector<double> z{0.2, -0.4};
    const RiskConfig cfg{0.1, 2.0, LossConvention::NegatedReturns};
    const auto g = subgradient(u, 0.0, z, cfg); // -<z,u> = 0.1 >= 0
    CHECK(g.g_u[0] == doctest::Approx(-0.2 - 2.0 / 0.9 * 0.2));
    CHECK(g.g_u[1] == doctest::Approx(0.4 + 2.0 / 0.9 * 0.4));
}

TEST_CASE("property: g_theta takes one of two values and respects its bound") {
    Engine rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 20000; ++i) {
        const RiskConfig cfg{0.01 + 0.98 * unit(rng), 3.0 * unit(rng)};
        std::vector<double> z{normal(rng), normal(rng), normal(rng)};
        std::vector<double> u{unit(rng), unit(rng), unit(rng)};
        const double s = u[0] + u[1] + u[2];
        for (double& w : u) w /= s;
        const auto g = subgradient(u, normal(rng), z, cfg);
        const double hi = cfg.lambda;
        const double lo = cfg.lambda * (1.0 - 1.0 / (1.0 - cfg.alpha));
        CHECK((g.g_theta == hi || g.g_theta == doctest::Approx(lo).epsilon(1e-15)));
        CHECK(std::abs(g.g_theta) <= cfg.lambda * std::max(1.0, cfg.alpha / (1.0 - cfg.alpha)) + 1e-12);
    }
}

TEST_CASE("property: psi is convex in theta and bounded below") {
    Engine rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto b = normal_batch(500, 4);
    for (int i = 0; i < 2000; ++i) {
        const RiskConfig cfg{0.01 + 0.98 * unit(rng), 1.0};
        double t1 = -3.0 + 6.0 * unit(rng), t2 = -3.0 + 6.0 * unit(rng);
        if (t1 > t2) std::swap(t1, t2);
        const double t = unit(rng);
        const double mid = psi(t * t1 + (1.0 - t) * t2, one, b, cfg);
        CHECK(mid <= t * psi(t1, one, b, cfg) + (1.0 - t) * psi(t2, one, b, cfg) + 1e-12);
        double mean = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) mean += b.row(k)[0];
        mean /= static_cast<double>(b.size());
        CHECK(psi(t1, one, b, cfg) >= t1 - 1e-12);
        CHECK(psi(t1, one, b, cfg) >= mean - 1e-12);
    }
}

TEST_CASE("cvar_batch on a point mass and small batches") {
    const auto b = constant_batch({0.1, 0.3}, 40);
    const std::vector<double> u{0.5, 0.5};
    const auto est = cvar_batch(u, b, RiskConfig{0.95, 0.0});
    CHECK(est.var == doctest::Approx(0.2));
    CHECK(est.cvar == doctest::Approx(0.2));
    CHECK(est.n_samples == 40);
    try {
        cvar_batch(u, constant_batch({0.1, 0.3}, 19), RiskConfig{0.95, 0.0});
        FAIL("expected BatchTooSmall");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BatchTooSmall);
    }
}

TEST_CASE("cvar_batch minimises psi and returns the lower end of the argmin") {
    // 10 samples, alpha = 0.8: (1-alpha) n = 2 is an integer, so the argmin is an interval.
    SampleBatch b(1);
    for (double v : {5.0, 1.0, 9.0, 3.0, 7.0, 2.0, 8.0, 4.0, 6.0, 10.0}) b.push_back(std::vector<double>{v});
    const RiskConfig cfg{0.8, 0.0};
    const auto est = cvar_batch(one, b, cfg);
    CHECK(est.var == 8.0);
    CHECK(est.cvar == doctest::Approx(9.5));
    for (double t = 0.0; t <= 11.0; t += 0.01) CHECK(psi(t, one, b, cfg) >= est.cvar - 1e-12);
    CHECK(psi(8.5, one, b, cfg) == doctest::Approx(est.cvar));
    CHECK(psi(7.99, one, b, cfg) > est.cvar);
}

TEST_CASE("cvar_batch is scale- and translation-equivariant") {
    const auto b = normal_batch(5000, 12);
    const RiskConfig cfg{0.9, 0.0};
    const auto base = cvar_batch(one, b, cfg);
    SampleBatch doubled(1), shifted(1);
    for (std::size_t i = 0; i < b.size(); ++i) {
        doubled.push_back(std::vector<double>{2.0 * b.row(i)[0]});
        shifted.push_back(std::vector<double>{b.row(i)[0] + 0.75});
    }
    const auto d = cvar_batch(one, doubled, cfg);
    CHECK(d.var == 2.0 * base.var);
    CHECK(d.cvar == 2.0 * base.cvar);
    const auto s = cvar_batch(one, shifted, cfg);
    CHECK(s.var == doctest::Approx(base.var + 0.75).epsilon(1e-12));
    CHECK(s.cvar == doctest::Approx(base.cvar + 0.75).epsilon(1e-12));
    CHECK(base.cvar - base.var >= 0.0);
}

TEST_CASE("cvar_batch matches the Gaussian oracle and honours the convention") {
    const auto b = normal_batch(1000000, 21);
    const auto est = cvar_batch(one, b, RiskConfig{0.95, 0.0});
    CHECK(est.var == doctest::Approx(1.6449).epsilon(0.01 / 1.6449));
    CHECK(std::abs(est.cvar - 2.0627) <= 0.01);
    CHECK(est.std_err > 0.0);
    CHECK(est.std_err < 0.01);
    SampleBatch shifted(1);
    for (std::size_t i = 0; i < 100000; ++i) shifted.push_back(std::vector<double>{1.0 + b.row(i)[0]});
    const auto neg = cvar_batch(one, shifted, RiskConfig{0.95, 0.0, LossConvention::NegatedReturns});
    // Loss -X with X ~ N(1, 1): CV@R = -1 + 2.0627.
    CHECK(std::abs(neg.cvar - (-1.0 + 2.0627)) <= 0.03);
}

TEST_CASE("p_lambda Monte-Carlo self-consistency on independent batches") {
    const GaussianSampler s({0.0, 1.0}, Eigen::Matrix2d{{0.25, 0.1}, {0.1, 2.0}});
    const std::vector<double> u{0.6, 0.4};
    const RiskConfig cfg{0.05, 0.9};
    const std::size_t n = 200000;
    const auto b1 = draw_batch(s, n, 1), b2 = draw_batch(s, n, 2);
    auto per_sample_se = [&](const SampleBatch& b) {
        std::vector<double> t(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) {
            const double v = tail_value(b.row(i), u, cfg.convention);
            t[i] = -v + cfg.lambda * (0.1 + std::max(0.0, v - 0.1) / (1.0 - cfg.alpha));
        }
        return oracle::moments(t).se;
    };
    const double se = std::hypot(per_sample_se(b1), per_sample_se(b2));
    CHECK(std::abs(p_lambda(u, 0.1, b1, cfg) - p_lambda(u, 0.1, b2, cfg)) <= 4.0 * se);
}

TEST_CASE("mean subgradient matches finite differences of p_lambda") {
    Eigen::Matrix3d cov;
    cov << 0.25, 0.05, 0.0, 0.05, 2.25, -0.3, 0.0, -0.3, 9.0;
    const GaussianSampler s({0.0, 1.0, 2.0}, cov);
    const RiskConfig cfg{0.05, 0.9};
    const std::vector<double> u{0.2, 0.5, 0.3};
    const double theta = 0.4;
    const std::size_t n = 200000;
    const auto batch = draw_batch(s, n, 33);

    std::vector<std::vector<double>> comps(4, std::vector<double>(n));
    std::vector<double> g(3);
    for (std::size_t i = 0; i < n; ++i) {
        double gt = 0.0;
        subgradient_into(u, theta, batch.row(i), cfg, g, gt);
        for (int c = 0; c < 3; ++c) comps[static_cast<std::size_t>(c)][i] = g[static_cast<std::size_t>(c)];
        comps[3][i] = gt;
    }
    const double step = 1e-3;
    for (int c = 0; c < 4; ++c) {
        double fd;
        if (c < 3) {
            auto up = u, dn = u;
            up[static_cast<std::size_t>(c)] += step;
            dn[static_cast<std::size_t>(c)] -= step;
            fd = (p_lambda(up, theta, batch, cfg) - p_lambda(dn, theta, batch, cfg)) / (2.0 * step);
        } else {
            fd = (p_lambda(u, theta + step, batch, cfg) - p_lambda(u, theta - step, batch, cfg)) / (2.0 * step);
        }
        const auto mom = oracle::moments(comps[static_cast<std::size_t>(c)]);
        CHECK(std::abs(mom.mean - fd) <= 3.0 * mom.se);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cvarsmd/error.hpp"
#include "cvarsmd/frontier.hpp"

#include <cmath>

using namespace cvarsmd;

namespace {

PortfolioModel deterministic_model() {
    PortfolioModel m;
    m.cir = CirParams{1.0, 0.02, 0.0, 0.02};
    m.gbm_mu = {0.05, 0.10};
    m.gbm_sigma = {0.0, 0.0};
    m.corr = Eigen::MatrixXd::Identity(3, 3);
    return m;
}

PortfolioModel synthetic_model() {
    PortfolioModel m;
    m.cir = CirParams{0.5, 0.03, 0.05, 0.03};
    m.gbm_mu = {0.08, 0.16};
    m.gbm_sigma = {0.10, 0.22};
    m.corr = Eigen::MatrixXd::Identity(3, 3);
    return m;
}

FrontierPoint point(double lambda, double er, double cvar) {
    FrontierPoint p;
    p.lambda = lambda;
    p.er = er;
    p.cvar = cvar;
    return p;
}

} // namespace

TEST_CASE("lambda grid") {
    const LambdaGrid g{0.0, 1.0, 11};
    CHECK_NOTHROW(g.validate());
    CHECK(g.value(0) == 0.0);
    CHECK(g.value(10) == 1.0);
    CHECK(g.value(3) == doctest::Approx(0.3));
    CHECK(LambdaGrid{0.5, 0.5, 1}.values() == std::vector<double>{0.5});
    CHECK_THROWS_AS((LambdaGrid{1.0, 0.5, 3}.validate()), Error);
    CHECK_THROWS_AS((LambdaGrid{-1.0, 0.5, 3}.validate()), Error);
    CHECK_THROWS_AS((LambdaGrid{0.0, 0.5, 0}.validate()), Error);
}

TEST_CASE("select_sharpe") {
    CHECK(select_sharpe({point(0.0, 0.1, 0.2)}, 0.0).lambda == 0.0);
    const std::vector<FrontierPoint> two{point(0.0, 0.1, 0.05), point(1.0, 0.15, 0.10)};
    CHECK(select_sharpe(two, 0.0).lambda == 0.0);
    const std::vector<FrontierPoint> tie{point(0.7, 0.2, 0.1), point(0.3, 0.2, 0.1)};
    CHECK(select_sharpe(tie, 0.0).lambda == 0.3);
    std::vector<FrontierPoint> flat{point(0.0, 0.1, 0.0), point(1.0, 0.1, -0.1)};
    try {
        select_sharpe(flat, 0.0);
        FAIL("expected NoFeasiblePoint");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoFeasiblePoint);
    }
    flat.push_back(point(2.0, 0.3, 0.2));
    flat.back().error = "Diverged";
    CHECK_THROWS_AS(select_sharpe(flat, 0.0), Error);
    CHECK_THROWS_AS(select_sharpe({}, 0.0), Error);
}

TEST_CASE("single-point sweep at lambda 0 concentrates on the best-mean asset") {
    const auto res = sweep(deterministic_model(), RiskConfig{0.05, 0.0}, LambdaGrid{0.0, 0.0, 1},
                           StepSchedule::constant(5000, 0.5, 1), 1);
    REQUIRE(res.points.size() == 1);
    const auto& p = res.points[0];
    CHECK(p.ok());
    CHECK(p.weights[2] >= 0.99);
    CHECK(res.er_riskfree == doctest::Approx(std::exp(0.02) - 1.0).epsilon(1e-12));
    CHECK(res.er_riskfree_se == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("deterministic model: er equals <mean returns, weights>") {
    const auto model = deterministic_model();
    const std::vector<double> z{std::exp(0.02) - 1.0, std::exp(0.05) - 1.0, std::exp(0.10) - 1.0};
    const auto res = sweep(model, RiskConfig{0.05, 0.0}, LambdaGrid{0.0, 2.0, 5},
                           StepSchedule::constant(2000, 0.3, 1), 4);
    for (const auto& p : res.points) {
        REQUIRE(p.ok());
        double plug_in = 0.0;
        for (std::size_t i = 0; i < 3; ++i) plug_in += z[i] * p.weights[i];
        CHECK(p.er == doctest::Approx(plug_in).epsilon(1e-9));
        REQUIRE(p.sharpe.has_value());
        CHECK(*p.sharpe == doctest::Approx((p.er - res.er_riskfree) / p.cvar));
    }
}

TEST_CASE("sweep output does not depend on execution order or thread count") {
    const auto model = synthetic_model();
    const RiskConfig cfg{0.05, 0.0};
    const LambdaGrid grid{0.0, 1.0, 6};
    const auto sched = StepSchedule::constant(2000, 0.2, 4);
    const auto ref = sweep(model, cfg, grid, sched, 11);
    FrontierOptions rev;
    rev.reverse_execution = true;
    rev.threads = 3;
    const auto other = sweep(model, cfg, grid, sched, 11, rev);
    REQUIRE(ref.points.size() == other.points.size());
    for (std::size_t i = 0; i < ref.points.size(); ++i) {
        CHECK(ref.points[i].lambda == other.points[i].lambda);
        CHECK(ref.points[i].er == other.points[i].er);
        CHECK(ref.points[i].cvar == other.points[i].cvar);
        CHECK(ref.points[i].weights == other.points[i].weights);
        CHECK(ref.points[i].run_seed == other.points[i].run_seed);
        if (i > 0) CHECK(ref.points[i].lambda > ref.points[i - 1].lambda);
    }
    CHECK(ref.er_riskfree == other.er_riskfree);
}

TEST_CASE("point seeds are keyed by lambda so refining the grid keeps shared points") {
    const auto model = synthetic_model();
    const auto sched = StepSchedule::constant(500, 0.2, 2);
    const auto coarse = sweep(model, RiskConfig{0.05, 0.0}, LambdaGrid{0.0, 1.0, 3}, sched, 5);
    const auto fine = sweep(model, RiskConfig{0.05, 0.0}, LambdaGrid{0.0, 1.0, 5}, sched, 5);
    CHECK(coarse.points[1].lambda == fine.points[2].lambda);
    CHECK(coarse.points[1].er == fine.points[2].er);
    CHECK(coarse.points[2].weights == fine.points[4].weights);
    CHECK(frontier_point_seed(5, 0.0) == frontier_point_seed(5, -0.0));
}

TEST_CASE("failed points are kept with a diagnostic") {
    const auto model = deterministic_model();
    FrontierOptions opts;
    opts.run.theta_max = 1e-3;
    const auto res = sweep(model, RiskConfig{0.05, 0.0}, LambdaGrid{0.0, 1.0, 3},
                           StepSchedule::constant(200, 0.3, 1), 2, opts);
    REQUIRE(res.points.size() == 3);
    CHECK(res.points[0].ok());
    CHECK_FALSE(res.points[2].ok());
    CHECK(res.points[2].error.find("Diverged") != std::string::npos);
    CHECK_FALSE(res.points[2].sharpe.has_value());
    CHECK(select_sharpe(res.points, res.er_riskfree).lambda == 0.0);
}

TEST_CASE("the penalty moves weight away from the riskiest asset") {
    const auto res = sweep(synthetic_model(), RiskConfig{0.05, 0.0}, LambdaGrid{0.0, 1.0, 3},
                           StepSchedule::constant(20000, 0.2, 4), 3);
    CHECK(res.points.back().weights[2] < res.points.front().weights[2]);
    CHECK(res.points.back().cvar < res.points.front().cvar);
}

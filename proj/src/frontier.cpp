#include "cvarsmd/frontier.hpp"

#include "cvarsmd/error.hpp"
#include "cvarsmd/parallel.hpp"
#include "cvarsmd/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace cvarsmd {

void LambdaGrid::validate() const {
    if (!std::isfinite(lambda_min) || !std::isfinite(lambda_max) || lambda_min < 0.0 || lambda_max < lambda_min)
        throw Error(ErrorCode::InvalidParams, "grid needs 0 <= lambda_min <= lambda_max");
    if (n_points < 1) throw Error(ErrorCode::InvalidParams, "grid.n_points must be >= 1");
}

double LambdaGrid::value(std::size_t s) const {
    if (n_points == 1) return lambda_min;
    if (s + 1 == n_points) return lambda_max;
    return lambda_min + static_cast<double>(s) * (lambda_max - lambda_min) / static_cast<double>(n_points - 1);
}

std::vector<double> LambdaGrid::values() const {
    std::vector<double> out(n_points);
    for (std::size_t s = 0; s < n_points; ++s) out[s] = value(s);
    return out;
}

std::uint64_t frontier_point_seed(std::uint64_t master, double lambda) {
    // +0.0 and -0.0 share a seed.
    return derive_seed(master, Stream::FrontierPoint, std::bit_cast<std::uint64_t>(lambda + 0.0));
}

FixedPortfolioEstimate estimate_fixed_portfolio(const ReturnSampler& sampler, std::span<const double> weights,
                                                const StepSchedule& schedule, std::uint64_t seed) {
    if (weights.size() != sampler.dim()) throw Error(ErrorCode::DimensionMismatch, "weights do not match sampler");
    schedule.validate();
    FixedPortfolioEstimate est;
    est.seed = derive_seed(seed, Stream::RiskFree, 0);
    std::vector<double> z(sampler.dim());
    double sum = 0.0;
    double sum_sq = 0.0;
    const std::uint64_t n = schedule.iterations;
    for (std::uint64_t k = 0; k < n; ++k) {
        Engine rng = make_engine(est.seed, Stream::Iteration, k);
        sampler.draw(rng, schedule.at(k).n_steps, z);
        const double v = tail_value(z, weights, LossConvention::AsWritten);
        sum += v;
        sum_sq += v * v;
    }
    if (n > 0) est.mean = sum / static_cast<double>(n);
    if (n > 1) {
        const double nn = static_cast<double>(n);
        est.std_err = std::sqrt(std::max(0.0, (sum_sq - sum * sum / nn) / (nn - 1.0)) / nn);
    }
    return est;
}

FrontierResult sweep(const ReturnSampler& sampler, const RiskConfig& base, const LambdaGrid& grid,
                     const StepSchedule& schedule, std::uint64_t seed, const FrontierOptions& options) {
    grid.validate();
    base.validate();
    schedule.validate();

    FrontierResult result;
    std::vector<double> riskless(sampler.dim(), 0.0);
    riskless[0] = 1.0;
    const auto rf = estimate_fixed_portfolio(sampler, riskless, schedule, seed);
    result.er_riskfree = rf.mean;
    result.er_riskfree_se = rf.std_err;
    result.riskfree_seed = rf.seed;

    const std::size_t n = grid.n_points;
    result.points.resize(n);
    parallel_for(n, options.threads, [&](std::size_t job) {
        const std::size_t s = options.reverse_execution ? n - 1 - job : job;
        FrontierPoint& point = result.points[s];
        point.lambda = grid.value(s);
        point.run_seed = frontier_point_seed(seed, point.lambda);
        RiskConfig cfg = base;
        cfg.lambda = point.lambda;
        try {
            const RunRecord run = run_smd(sampler, cfg, schedule, InitialPoint{}, point.run_seed, options.run);
            const SmdState& st = run.final_state;
            point.er = st.online.er();
            point.er_se = st.online.er_std_err();
            point.cvar = st.online.cvar();
            point.cvar_se = st.online.cvar_std_err();
            point.theta = st.cesaro_theta();
            point.weights = st.cesaro_u().vector();
            if (point.cvar > 0.0) point.sharpe = (point.er - result.er_riskfree) / point.cvar;
        } catch (const std::exception& e) {
            point.error = e.what();
        }
    });
    return result;
}

FrontierResult sweep(const PortfolioModel& model, const RiskConfig& base, const LambdaGrid& grid,
                     const StepSchedule& schedule, std::uint64_t seed, const FrontierOptions& options) {
    const PortfolioSampler sampler(model);
    return sweep(sampler, base, grid, schedule, seed, options);
}

std::size_t select_sharpe_index(const std::vector<FrontierPoint>& points, double er_riskfree) {
    std::optional<std::size_t> best;
    double best_ratio = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const FrontierPoint& p = points[i];
        if (!p.ok() || !(p.cvar > 0.0)) continue;
        const double ratio = (p.er - er_riskfree) / p.cvar;
        if (!std::isfinite(ratio)) continue;
        const bool better = !best || ratio > best_ratio
                            || (ratio == best_ratio && p.lambda < points[*best].lambda);
        if (better) {
            best = i;
            best_ratio = ratio;
        }
    }
    if (!best) throw Error(ErrorCode::NoFeasiblePoint, "no frontier point has cvar > 0");
    return *best;
}

const FrontierPoint& select_sharpe(const std::vector<FrontierPoint>& points, double er_riskfree) {
    return points[select_sharpe_index(points, er_riskfree)];
}

} // namespace cvarsmd

#pragma once

// Penalty sweep: one optimiser run per lambda, assembled into the
// (CV@R, expected return) frontier, plus Sharpe-ratio selection.

#include "cvarsmd/optim.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cvarsmd {

/// lambda_s = lambda_min + s (lambda_max - lambda_min) / (n_points - 1).
struct LambdaGrid {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::size_t n_points = 1;

    void validate() const;
    double value(std::size_t s) const;
    std::vector<double> values() const;
};

struct FrontierPoint {
    double lambda = 0.0;
    double er = 0.0;
    double er_se = 0.0;
    double cvar = 0.0;
    double cvar_se = 0.0;
    double theta = 0.0;
    std::vector<double> weights; ///< Cesaro-averaged allocation
    std::optional<double> sharpe; ///< empty when cvar <= 0 or the run failed
    std::uint64_t run_seed = 0;
    std::string error;            ///< empty on success

    bool ok() const noexcept { return error.empty(); }
};

struct FrontierResult {
    std::vector<FrontierPoint> points; ///< ascending in lambda
    double er_riskfree = 0.0;
    double er_riskfree_se = 0.0;
    std::uint64_t riskfree_seed = 0;
};

struct FrontierOptions {
    unsigned threads = 1;
    RunOptions run;
    /// Execute the grid from lambda_max down; the result is identical.
    bool reverse_execution = false;
};

/// Seed of the run at penalty `lambda`. Keyed by the value, not the grid
/// index, so refining or reordering a grid leaves existing points untouched.
std::uint64_t frontier_point_seed(std::uint64_t master, double lambda);

struct FixedPortfolioEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::uint64_t seed = 0;
};

/// Monte-Carlo mean of <z, w> over `schedule.iterations` draws, using the
/// schedule's per-iteration discretisation counts.
FixedPortfolioEstimate estimate_fixed_portfolio(const ReturnSampler& sampler, std::span<const double> weights,
                                                const StepSchedule& schedule, std::uint64_t seed);

/// Runs SMD at every grid point. The risk-free reference is a fixed-weight
/// run on the first asset under its own substream.
FrontierResult sweep(const ReturnSampler& sampler, const RiskConfig& base, const LambdaGrid& grid,
                     const StepSchedule& schedule, std::uint64_t seed, const FrontierOptions& options = {});

FrontierResult sweep(const PortfolioModel& model, const RiskConfig& base, const LambdaGrid& grid,
                     const StepSchedule& schedule, std::uint64_t seed, const FrontierOptions& options = {});

/// Index of the point maximising (er - er_riskfree) / cvar among successful
/// points with cvar > 0; ties go to the smaller lambda. Errors: NoFeasiblePoint.
std::size_t select_sharpe_index(const std::vector<FrontierPoint>& points, double er_riskfree);

const FrontierPoint& select_sharpe(const std::vector<FrontierPoint>& points, double er_riskfree);

} // namespace cvarsmd

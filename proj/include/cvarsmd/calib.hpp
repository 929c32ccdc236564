#pragma once

// Parameter estimation from historical series: GBM drift and volatility from
// log-returns, Pearson correlation, and CIR parameters by conditional-moment
// matching on the exact AR(1) structure of the CIR transition.

#include "cvarsmd/sde_sim.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace cvarsmd {

struct PriceSeries {
    std::string asset_id;
    std::vector<std::string> dates; ///< ISO-8601, strictly increasing
    std::vector<double> prices;     ///< strictly positive
    double dt = 1.0 / 252.0;        ///< sampling interval in years

    std::size_t size() const noexcept { return prices.size(); }

    /// Errors: SeriesTooShort, NonPositivePrice, MalformedInput (dates), InvalidParams (dt).
    void validate(std::size_t min_length = 3) const;
};

/// Strict `date,close` reader. Every malformed row is an error naming
/// `source` and the 1-based line. With `percent`, values are divided by 100.
PriceSeries parse_price_csv(std::istream& in, const std::string& source, std::string asset_id, double dt,
                            bool percent = false);
PriceSeries read_price_csv(const std::filesystem::path& path, std::string asset_id, double dt, bool percent = false);

std::vector<double> log_returns(const PriceSeries& series);

struct GbmEstimate {
    double mu = 0.0;
    double sigma = 0.0;
    double mu_se = 0.0;    ///< sigma / sqrt(n dt)
    double sigma_se = 0.0; ///< sigma / sqrt(2 n)
    std::size_t n_returns = 0;
};

/// sigma = sd(x) / sqrt(dt), mu = mean(x) / dt + sigma^2 / 2 with x the log-returns.
GbmEstimate estimate_gbm(const PriceSeries& series);

/// Inner join on dates; rows missing from any series are dropped.
/// Errors: InsufficientOverlap when fewer than `min_rows` dates survive.
std::vector<PriceSeries> align_series(const std::vector<PriceSeries>& series, std::size_t min_rows = 3);

struct CorrelationEstimate {
    Eigen::MatrixXd pearson;   ///< raw sample correlation
    Eigen::MatrixXd corr;      ///< positive-definite version used by the model
    bool repaired = false;
    std::vector<std::string> warnings;
};

/// Pearson correlation of equally long columns, then an eigenvalue floor of
/// 1e-8 and unit-diagonal rescaling when the matrix is not positive definite.
/// Errors: InsufficientOverlap (< 3 rows), DimensionMismatch.
CorrelationEstimate estimate_correlation(const std::vector<std::vector<double>>& columns);

/// Eigenvalue floor followed by rescaling to unit diagonal; exactly symmetric.
Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& corr, double floor = 1e-8);

struct CirFit {
    double phi = 1.0;       ///< AR(1) slope
    double intercept = 0.0;
    double a = 0.0;
    double b = 0.0;
    double sigma0 = 0.0;
    double r_last = 0.0;
    bool stable = false;    ///< phi in (0, 1); otherwise a is not identified
    std::vector<double> standardized_residuals; ///< one per transition
};

/// r_{t+dt} = c + phi r_t + e_t,  a = -ln(phi)/dt,  b = c/(1-phi),
/// sigma0^2 = mean(e_t^2 / v(r_t)) with v(r) = r (e^{-a dt} - e^{-2a dt})/a + b (1 - e^{-a dt})^2 / (2a).
/// Never throws on unstable fits: phi outside (0, 1) sets stable = false, a = 0,
/// b = sample mean and sigma0 from the raw residual variance.
CirFit fit_cir_ar1(const std::vector<double>& rates, double dt);

struct CirEstimate {
    CirParams params;
    double a_se = 0.0;
    double b_se = 0.0;
    double sigma0_se = 0.0;
    std::size_t bootstrap_draws = 0;
    std::vector<double> standardized_residuals;
    std::vector<std::string> warnings;
};

struct CirEstimateOptions {
    std::size_t bootstrap = 200;  ///< parametric bootstrap replications (0 disables)
    int substeps = 20;            ///< scheme steps per observation interval
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Moment-matching CIR fit with parametric-bootstrap standard errors.
/// Errors: SeriesTooShort (< 10), NonPositivePrice, UnstableEstimate.
CirEstimate estimate_cir(const PriceSeries& rates, const CirEstimateOptions& options = {});

struct ParameterError {
    std::string name;
    double value = 0.0;
    double std_err = 0.0;
};

struct CalibrationReport {
    PortfolioModel model;
    std::vector<std::string> asset_ids; ///< rate series first
    std::vector<ParameterError> standard_errors;
    std::size_t n_obs = 0;
    bool rate_conditions_satisfied = false; ///< a b > sigma0^2 and a > 2 sqrt(2) sigma0
    std::string cir_method;
    std::vector<std::string> warnings;
};

/// Aligns all series on common dates, fits the CIR on the rate series, GBMs on
/// the assets, and correlates the standardized CIR residuals with the asset
/// log-returns.
CalibrationReport calibrate(const PriceSeries& rates, const std::vector<PriceSeries>& assets,
                            const CirEstimateOptions& options = {});

} // namespace cvarsmd

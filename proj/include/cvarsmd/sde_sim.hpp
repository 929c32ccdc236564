#pragma once

// Portfolio return simulation: one riskless asset whose short rate follows a
// CIR diffusion (discretised with the drift-implicit Euler scheme on sqrt(r))
// plus m-1 correlated geometric Brownian motions sampled exactly at T = 1.

#include "cvarsmd/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace cvarsmd {

/// dr = a (b - r) dt + sigma0 sqrt(r) dB, started at r0.
struct CirParams {
    double a = 0.0;      ///< mean-reversion rate
    double b = 0.0;      ///< long-run mean
    double sigma0 = 0.0; ///< volatility coefficient
    double r0 = 0.0;     ///< initial short rate

    /// Throws InvalidParams unless a, b, r0 > 0 and sigma0 >= 0.
    void validate() const;

    /// 4ab - sigma0^2 > 0: the constant under the inner square root of the scheme.
    bool scheme_well_defined() const noexcept { return 4.0 * a * b - sigma0 * sigma0 > 0.0; }

    /// a b > sigma0^2 and a > 2 sqrt(2) sigma0.
    bool satisfies_rate_conditions() const noexcept;
};

struct PortfolioModel {
    CirParams cir;
    std::vector<double> gbm_mu;    ///< drifts of the m-1 risky assets
    std::vector<double> gbm_sigma; ///< volatilities of the m-1 risky assets
    Eigen::MatrixXd corr;          ///< m x m, index 0 is the rate Brownian motion

    std::size_t dim() const noexcept { return 1 + gbm_mu.size(); }

    /// Checks dimensions, parameter signs and that corr is a symmetric
    /// unit-diagonal matrix. Positive definiteness is checked by cholesky_factor.
    void validate() const;
};

struct CholeskyFactor {
    Eigen::MatrixXd lower; ///< L with L L^T = corr

    /// L without its first row and column.
    Eigen::MatrixXd trailing() const;
};

/// Plain Cholesky with a hard pivot floor of 1e-12.
/// Errors: DimensionMismatch (non-square), NotPositiveDefinite.
CholeskyFactor cholesky_factor(const Eigen::MatrixXd& corr);

/// One drift-implicit Euler step on y = sqrt(r), returned squared.
/// The result is nonnegative for any finite dB.
double cir_step(double r_prev, const CirParams& params, double h, double dB);

/// Step-size dependent constants of the scheme, hoisted out of hot loops.
class CirStepper {
public:
    CirStepper(const CirParams& params, double h);

    double operator()(double r_prev, double dB) const noexcept {
        const double p = (std::sqrt(r_prev) + half_sigma_ * dB) * inv_two_denom_;
        const double root = std::sqrt(p * p + constant_);
        // p + root cancels for p << 0; the conjugate form stays positive.
        const double y = p >= 0.0 ? p + root : constant_ / (root - p);
        return y * y;
    }

    double h() const noexcept { return h_; }

private:
    double h_;
    double half_sigma_;
    double inv_two_denom_; // 1 / (2 (1 + a h / 2))
    double constant_;      // (4ab - sigma0^2) h / (8 (1 + a h / 2))
};

struct CirPath {
    double h = 0.0;
    std::vector<double> values; ///< r_hat at k h, k = 0..N
    double riemann = 0.0;       ///< (1/N) sum_{k=1}^{N} r_hat_{kh}
};

/// Applies cir_step over the given Brownian increments (each of variance
/// 1/increments.size()). Errors: InvalidParams.
CirPath simulate_cir_path(const CirParams& params, std::span<const double> increments);

struct CirMoments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Exact conditional mean and variance of r_{s+t} given r_s.
CirMoments cir_conditional_moments(const CirParams& params, double r_s, double t);

struct ReturnSample {
    std::vector<double> z; ///< relative returns, initial prices scaled to 1
    double h_used = 0.0;
};

/// Draws one return vector. Draw order from `rng`: n_steps Brownian increments
/// of the rate (their sum is W0(1), reused in the GBM correlation terms), then
/// m-1 independent standard normals for W~.
ReturnSample sample_portfolio(const PortfolioModel& model, const CholeskyFactor& chol, int n_steps, Engine& rng);

/// Allocation-free variant of sample_portfolio writing into z (size m).
void sample_portfolio_into(const PortfolioModel& model, const CholeskyFactor& chol, int n_steps, Engine& rng,
                           std::span<double> z);

/// Riskless asset only: exp(riemann) - 1 and W0(1) from one discretised path.
struct RateDraw {
    double riskless_return = 0.0;
    double w0 = 0.0;
};
RateDraw sample_riskless(const CirParams& params, int n_steps, Engine& rng);

} // namespace cvarsmd

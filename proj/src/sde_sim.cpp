#include "cvarsmd/sde_sim.hpp"

#include "cvarsmd/error.hpp"

#include <cmath>
#include <string>

namespace cvarsmd {

namespace {

void require_finite_positive(double value, const char* name) {
    if (!std::isfinite(value) || value <= 0.0)
        throw Error(ErrorCode::InvalidParams, std::string(name) + " must be finite and > 0");
}

void require_scheme(const CirParams& p) {
    if (!p.scheme_well_defined())
        throw Error(ErrorCode::InvalidParams, "4ab - sigma0^2 must be > 0 for the implicit CIR scheme");
}

} // namespace

void CirParams::validate() const {
    require_finite_positive(a, "cir.a");
    require_finite_positive(b, "cir.b");
    require_finite_positive(r0, "cir.r0");
    if (!std::isfinite(sigma0) || sigma0 < 0.0)
        throw Error(ErrorCode::InvalidParams, "cir.sigma0 must be finite and >= 0");
}

bool CirParams::satisfies_rate_conditions() const noexcept {
    return a * b > sigma0 * sigma0 && a > 2.0 * std::sqrt(2.0) * sigma0;
}

void PortfolioModel::validate() const {
    cir.validate();
    if (gbm_mu.size() != gbm_sigma.size())
        throw Error(ErrorCode::DimensionMismatch, "gbm_mu and gbm_sigma differ in length");
    for (std::size_t i = 0; i < gbm_mu.size(); ++i) {
        if (!std::isfinite(gbm_mu[i]))
            throw Error(ErrorCode::InvalidParams, "gbm_mu[" + std::to_string(i) + "] is not finite");
        if (!std::isfinite(gbm_sigma[i]) || gbm_sigma[i] < 0.0)
            throw Error(ErrorCode::InvalidParams, "gbm_sigma[" + std::to_string(i) + "] must be >= 0");
    }
    const auto m = static_cast<Eigen::Index>(dim());
    if (corr.rows() != m || corr.cols() != m)
        throw Error(ErrorCode::DimensionMismatch,
                    "corr must be " + std::to_string(m) + "x" + std::to_string(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-12)
            throw Error(ErrorCode::InvalidParams, "corr must have a unit diagonal");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (!std::isfinite(corr(i, j)) || std::abs(corr(i, j) - corr(j, i)) > 1e-12)
                throw Error(ErrorCode::InvalidParams, "corr must be symmetric");
        }
    }
}

Eigen::MatrixXd CholeskyFactor::trailing() const {
    const Eigen::Index m = lower.rows();
    if (m <= 1) return Eigen::MatrixXd(0, 0);
    return lower.bottomRightCorner(m - 1, m - 1);
}

CholeskyFactor cholesky_factor(const Eigen::MatrixXd& corr) {
    constexpr double pivot_floor = 1e-12;
    if (corr.rows() != corr.cols()) throw Error(ErrorCode::DimensionMismatch, "correlation matrix is not square");
    const Eigen::Index m = corr.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double pivot = corr(j, j);
        for (Eigen::Index k = 0; k < j; ++k) pivot -= L(j, k) * L(j, k);
        if (!(pivot > pivot_floor))
            throw Error(ErrorCode::NotPositiveDefinite, "pivot " + std::to_string(j) + " is <= 1e-12");
        L(j, j) = std::sqrt(pivot);
        for (Eigen::Index i = j + 1; i < m; ++i) {
            double s = corr(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            L(i, j) = s / L(j, j);
        }
    }
    return CholeskyFactor{std::move(L)};
}

CirStepper::CirStepper(const CirParams& params, double h) : h_(h) {
    require_scheme(params);
    if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorCode::InvalidParams, "step size h must be > 0");
    const double denom = 1.0 + params.a * h / 2.0;
    half_sigma_ = params.sigma0 / 2.0;
    inv_two_denom_ = 1.0 / (2.0 * denom);
    constant_ = (4.0 * params.a * params.b - params.sigma0 * params.sigma0) * h / (8.0 * denom);
}

double cir_step(double r_prev, const CirParams& params, double h, double dB) {
    require_scheme(params);
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidParams, "step size h must be > 0");
    if (!(r_prev >= 0.0)) throw Error(ErrorCode::InvalidParams, "r_prev must be >= 0");
    const double denom = 1.0 + params.a * h / 2.0;
    const double x = std::sqrt(r_prev) + params.sigma0 / 2.0 * dB;
    const double first = x / (2.0 * denom);
    const double constant = (4.0 * params.a * params.b - params.sigma0 * params.sigma0) * h / (8.0 * denom);
    const double root = std::hypot(first, std::sqrt(constant));
    const double y = first >= 0.0 ? first + root : constant / (root - first);
    return y * y;
}

CirPath simulate_cir_path(const CirParams& params, std::span<const double> increments) {
    if (increments.empty()) throw Error(ErrorCode::InvalidParams, "n_steps must be >= 1");
    const auto n = increments.size();
    CirPath path;
    path.h = 1.0 / static_cast<double>(n);
    path.values.reserve(n + 1);
    path.values.push_back(params.r0);
    double sum = 0.0;
    double r = params.r0;
    for (double dB : increments) {
        r = cir_step(r, params, path.h, dB);
        path.values.push_back(r);
        sum += r;
    }
    path.riemann = sum / static_cast<double>(n);
    return path;
}

CirMoments cir_conditional_moments(const CirParams& params, double r_s, double t) {
    const double e1 = std::exp(-params.a * t);
    const double e2 = std::exp(-2.0 * params.a * t);
    const double s2 = params.sigma0 * params.sigma0;
    CirMoments out;
    out.mean = r_s * e1 + params.b * (1.0 - e1);
    out.variance = r_s * (s2 / params.a) * (e1 - e2) + (params.b * s2 / (2.0 * params.a)) * (1.0 - e1) * (1.0 - e1);
    return out;
}

RateDraw sample_riskless(const CirParams& params, int n_steps, Engine& rng) {
    if (n_steps < 1) throw Error(ErrorCode::InvalidParams, "n_steps must be >= 1");
    const double h = 1.0 / n_steps;
    const CirStepper step(params, h);
    std::normal_distribution<double> normal(0.0, std::sqrt(h));
    double r = params.r0;
    double sum = 0.0;
    double w0 = 0.0;
    for (int k = 0; k < n_steps; ++k) {
        const double dB = normal(rng);
        w0 += dB;
        r = step(r, dB);
        sum += r;
    }
    return RateDraw{std::exp(sum / n_steps) - 1.0, w0};
}

void sample_portfolio_into(const PortfolioModel& model, const CholeskyFactor& chol, int n_steps, Engine& rng,
                           std::span<double> z) {
    const std::size_t m = model.dim();
    if (z.size() != m) throw Error(ErrorCode::DimensionMismatch, "output span does not match model dimension");
    const RateDraw rate = sample_riskless(model.cir, n_steps, rng);
    z[0] = rate.riskless_return;
    if (m == 1) return;

    // W~ components live in z[1..m-1] until they are overwritten row by row;
    // row i of L only reads W_1..W_i, so iterate from the bottom up.
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 1; i < m; ++i) z[i] = normal(rng);
    const auto& L = chol.lower;
    for (std::size_t i = m - 1; i >= 1; --i) {
        double b = L(static_cast<Eigen::Index>(i), 0) * rate.w0;
        for (std::size_t j = 1; j <= i; ++j) b += L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
        const double mu = model.gbm_mu[i - 1];
        const double sigma = model.gbm_sigma[i - 1];
        z[i] = std::exp((mu - 0.5 * sigma * sigma) + sigma * b) - 1.0;
    }
}

ReturnSample sample_portfolio(const PortfolioModel& model, const CholeskyFactor& chol, int n_steps, Engine& rng) {
    ReturnSample out;
    out.z.resize(model.dim());
    sample_portfolio_into(model, chol, n_steps, rng, out.z);
    out.h_used = 1.0 / n_steps;
    return out;
}

} // namespace cvarsmd

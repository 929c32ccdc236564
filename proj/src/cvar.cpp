#include "cvarsmd/cvar.hpp"

#include "cvarsmd/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace cvarsmd {

void RiskConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidParams, "alpha must lie in (0, 1)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidParams, "lambda must be >= 0");
}

SampleBatch::SampleBatch(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0 || data_.size() % dim_ != 0)
        throw Error(ErrorCode::DimensionMismatch, "batch data is not a whole number of rows");
}

void SampleBatch::push_back(std::span<const double> z) {
    if (z.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "sample dimension mismatch");
    data_.insert(data_.end(), z.begin(), z.end());
}

double tail_value(std::span<const double> z, std::span<const double> u, LossConvention convention) {
    double v = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) v += z[i] * u[i];
    return convention == LossConvention::NegatedReturns ? -v : v;
}

namespace {

void require_batch(std::span<const double> u, const SampleBatch& samples) {
    if (samples.empty()) throw Error(ErrorCode::EmptyBatch, "sample batch is empty");
    if (u.size() != samples.dim()) throw Error(ErrorCode::DimensionMismatch, "weights do not match sample dimension");
}

} // namespace

double psi(double theta, std::span<const double> u, const SampleBatch& samples, const RiskConfig& cfg) {
    require_batch(u, samples);
    double tail = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        tail += std::max(0.0, tail_value(samples.row(i), u, cfg.convention) - theta);
    return theta + tail / (static_cast<double>(samples.size()) * (1.0 - cfg.alpha));
}

double p_lambda(std::span<const double> u, double theta, const SampleBatch& samples, const RiskConfig& cfg) {
    require_batch(u, samples);
    double mean = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
        mean += tail_value(samples.row(i), u, LossConvention::AsWritten);
    mean /= static_cast<double>(samples.size());
    return -mean + cfg.lambda * psi(theta, u, samples, cfg);
}

bool subgradient_into(std::span<const double> u, double theta, std::span<const double> z, const RiskConfig& cfg,
                      std::span<double> g_u, double& g_theta) {
    const double sign = cfg.convention == LossConvention::NegatedReturns ? -1.0 : 1.0;
    const bool in_tail = tail_value(z, u, cfg.convention) >= theta;
    const double tail_scale = in_tail ? cfg.lambda / (1.0 - cfg.alpha) : 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) g_u[i] = -z[i] + tail_scale * sign * z[i];
    g_theta = cfg.lambda * (1.0 - (in_tail ? 1.0 / (1.0 - cfg.alpha) : 0.0));
    return in_tail;
}

SubgradientSample subgradient(std::span<const double> u, double theta, std::span<const double> z,
                              const RiskConfig& cfg) {
    if (u.size() != z.size()) throw Error(ErrorCode::DimensionMismatch, "weights do not match sample dimension");
    SubgradientSample g;
    g.g_u.resize(z.size());
    subgradient_into(u, theta, z, cfg, g.g_u, g.g_theta);
    return g;
}

CvarEstimate cvar_of_values(std::vector<double> values, double alpha) {
    const std::size_t n = values.size();
    const auto min_size = static_cast<std::size_t>(std::ceil(1.0 / (1.0 - alpha) - 1e-9));
    if (n == 0 || n < min_size)
        throw Error(ErrorCode::BatchTooSmall, "need at least " + std::to_string(min_size) + " samples, got "
                                                  + std::to_string(n));
    // Lower end of argmin psi: smallest order statistic x_(k) with #{x > x_(k)} <= (1-alpha) n.
    const double tail_count = std::floor((1.0 - alpha) * static_cast<double>(n) + 1e-9);
    std::size_t k = n - static_cast<std::size_t>(tail_count);
    k = std::clamp<std::size_t>(k, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
    const double var = values[k - 1];

    const double scale = 1.0 / (1.0 - alpha);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double x : values) {
        const double term = var + scale * std::max(0.0, x - var);
        sum += term;
        sum_sq += term * term;
    }
    const double nn = static_cast<double>(n);
    CvarEstimate out;
    out.var = var;
    out.cvar = sum / nn;
    out.n_samples = n;
    const double variance = n > 1 ? std::max(0.0, (sum_sq - sum * sum / nn) / (nn - 1.0)) : 0.0;
    out.std_err = std::sqrt(variance / nn);
    return out;
}

CvarEstimate cvar_batch(std::span<const double> u, const SampleBatch& samples, const RiskConfig& cfg) {
    if (samples.empty()) throw Error(ErrorCode::BatchTooSmall, "sample batch is empty");
    if (u.size() != samples.dim()) throw Error(ErrorCode::DimensionMismatch, "weights do not match sample dimension");
    std::vector<double> values(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) values[i] = tail_value(samples.row(i), u, cfg.convention);
    return cvar_of_values(std::move(values), cfg.alpha);
}

GaussianRisk gaussian_cvar_oracle(double mu, double sigma, double alpha) {
    if (sigma == 0.0) return {mu, mu};
    const boost::math::normal_distribution<double> standard;
    const double q = boost::math::quantile(standard, alpha);
    const double density = boost::math::pdf(standard, q);
    return {mu + sigma * q, mu + sigma * density / (1.0 - alpha)};
}

double gaussian_psi(double mu, double sigma, double theta, double alpha) {
    if (sigma == 0.0) return theta + std::max(0.0, mu - theta) / (1.0 - alpha);
    const boost::math::normal_distribution<double> standard;
    const double d = (mu - theta) / sigma;
    const double tail = (mu - theta) * boost::math::cdf(standard, d) + sigma * boost::math::pdf(standard, d);
    return theta + tail / (1.0 - alpha);
}

} // namespace cvarsmd

#include "cvarsmd/sampler.hpp"

#include "cvarsmd/error.hpp"
#include "cvarsmd/hash.hpp"

#include <random>

namespace cvarsmd {

PortfolioSampler::PortfolioSampler(PortfolioModel model) : model_(std::move(model)) {
    model_.validate();
    chol_ = cholesky_factor(model_.corr);
}

void PortfolioSampler::draw(Engine& rng, int n_steps, std::span<double> z) const {
    sample_portfolio_into(model_, chol_, n_steps, rng, z);
}

std::uint64_t PortfolioSampler::fingerprint() const {
    Fnv1a h;
    h.bytes("portfolio").f64(model_.cir.a).f64(model_.cir.b).f64(model_.cir.sigma0).f64(model_.cir.r0);
    h.f64s(model_.gbm_mu).f64s(model_.gbm_sigma);
    h.f64s(std::span<const double>(model_.corr.data(), static_cast<std::size_t>(model_.corr.size())));
    return h.digest();
}

GaussianSampler::GaussianSampler(std::vector<double> mean, const Eigen::MatrixXd& cov)
    : mean_(std::move(mean)), cov_(cov) {
    const auto m = static_cast<Eigen::Index>(mean_.size());
    if (m == 0 || cov.rows() != m || cov.cols() != m)
        throw Error(ErrorCode::DimensionMismatch, "covariance does not match mean dimension");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositiveDefinite, "covariance is not positive definite");
    chol_ = llt.matrixL();
}

void GaussianSampler::draw(Engine& rng, int, std::span<double> z) const {
    const std::size_t m = mean_.size();
    if (z.size() != m) throw Error(ErrorCode::DimensionMismatch, "output span does not match sampler dimension");
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < m; ++i) z[i] = normal(rng);
    for (std::size_t i = m; i-- > 0;) {
        double v = 0.0;
        for (std::size_t j = 0; j <= i; ++j) v += chol_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
        z[i] = mean_[i] + v;
    }
}

std::uint64_t GaussianSampler::fingerprint() const {
    Fnv1a h;
    h.bytes("gaussian").f64s(mean_);
    h.f64s(std::span<const double>(cov_.data(), static_cast<std::size_t>(cov_.size())));
    return h.digest();
}

std::uint64_t DeterministicSampler::fingerprint() const { return Fnv1a().bytes("deterministic").f64s(z_).digest(); }

void DeterministicSampler::draw(Engine&, int, std::span<double> z) const {
    if (z.size() != z_.size()) throw Error(ErrorCode::DimensionMismatch, "output span does not match sampler dimension");
    std::copy(z_.begin(), z_.end(), z.begin());
}

} // namespace cvarsmd

#pragma once

#include "cvarsmd/rng.hpp"
#include "cvarsmd/sde_sim.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cvarsmd {

/// Source of return vectors for the optimisers. `n_steps` is the CIR
/// discretisation count requested by the step schedule; exact samplers ignore it.
class ReturnSampler {
public:
    virtual ~ReturnSampler() = default;
    virtual std::size_t dim() const = 0;
    virtual void draw(Engine& rng, int n_steps, std::span<double> z) const = 0;
    /// Stable hash of the sampler's parameters, recorded for provenance.
    virtual std::uint64_t fingerprint() const = 0;
};

/// CIR + correlated GBM portfolio: discretised rate integral, exact GBM marginals.
class PortfolioSampler final : public ReturnSampler {
public:
    explicit PortfolioSampler(PortfolioModel model);

    std::size_t dim() const override { return model_.dim(); }
    void draw(Engine& rng, int n_steps, std::span<double> z) const override;
    std::uint64_t fingerprint() const override;

    const PortfolioModel& model() const noexcept { return model_; }
    const CholeskyFactor& cholesky() const noexcept { return chol_; }

private:
    PortfolioModel model_;
    CholeskyFactor chol_;
};

/// Exact multivariate normal returns N(mean, cov). Bias-free reference problem
/// for convergence-rate checks.
class GaussianSampler final : public ReturnSampler {
public:
    GaussianSampler(std::vector<double> mean, const Eigen::MatrixXd& cov);

    std::size_t dim() const override { return mean_.size(); }
    void draw(Engine& rng, int n_steps, std::span<double> z) const override;
    std::uint64_t fingerprint() const override;

    const std::vector<double>& mean() const noexcept { return mean_; }
    const Eigen::MatrixXd& covariance() const noexcept { return cov_; }

private:
    std::vector<double> mean_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd chol_;
};

/// Fixed return vector; every draw returns the same z.
class DeterministicSampler final : public ReturnSampler {
public:
    explicit DeterministicSampler(std::vector<double> z) : z_(std::move(z)) {}

    std::size_t dim() const override { return z_.size(); }
    void draw(Engine& rng, int n_steps, std::span<double> z) const override;
    std::uint64_t fingerprint() const override;

private:
    std::vector<double> z_;
};

} // namespace cvarsmd

#pragma once

// Penalised objective p_lambda(u, theta) = -E<Z,u> + lambda psi_alpha(u, theta)
// with the Rockafellar-Uryasev functional
//   psi_alpha(u, theta) = theta + E[(<Z,u> - theta)^+] / (1 - alpha),
// its stochastic subgradient, and batch / closed-form V@R and CV@R estimators.
//
// Sign convention: psi integrates the upper positive part exactly as the
// optimiser's gradients do (LossConvention::AsWritten). NegatedReturns swaps
// z for -z inside psi, which gives the textbook lower-tail (loss) CV@R.

#include <cstddef>
#include <span>
#include <vector>

namespace cvarsmd {

enum class LossConvention { AsWritten, NegatedReturns };

struct RiskConfig {
    double alpha = 0.05;  ///< tail level in (0, 1)
    double lambda = 0.0;  ///< penalty weight >= 0
    LossConvention convention = LossConvention::AsWritten;

    /// Throws InvalidParams on alpha outside (0,1) or negative lambda.
    void validate() const;
};

/// Row-major batch of return vectors, one row per sample.
class SampleBatch {
public:
    SampleBatch() = default;
    explicit SampleBatch(std::size_t dim) : dim_(dim) {}
    SampleBatch(std::size_t dim, std::vector<double> data);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    bool empty() const noexcept { return size() == 0; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

    void push_back(std::span<const double> z);
    void resize(std::size_t n) { data_.resize(n * dim_); }
    void reserve(std::size_t n) { data_.reserve(n * dim_); }

    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

/// <z,u>, or <-z,u> under NegatedReturns.
double tail_value(std::span<const double> z, std::span<const double> u, LossConvention convention);

double psi(double theta, std::span<const double> u, const SampleBatch& samples, const RiskConfig& cfg);

double p_lambda(std::span<const double> u, double theta, const SampleBatch& samples, const RiskConfig& cfg);

struct SubgradientSample {
    std::vector<double> g_u;
    double g_theta = 0.0;
};

/// Single-sample subgradient of p_lambda. The indicator uses >= (ties count).
SubgradientSample subgradient(std::span<const double> u, double theta, std::span<const double> z,
                              const RiskConfig& cfg);

/// In-place variant for hot loops; g_u must have the dimension of z.
/// Returns whether the tail indicator fired.
bool subgradient_into(std::span<const double> u, double theta, std::span<const double> z, const RiskConfig& cfg,
                      std::span<double> g_u, double& g_theta);

struct CvarEstimate {
    double var = 0.0;    ///< empirical alpha-quantile (lower end of the psi argmin)
    double cvar = 0.0;   ///< psi(var)
    std::size_t n_samples = 0;
    double std_err = 0.0;
};

/// Requires at least ceil(1/(1-alpha)) samples (BatchTooSmall).
CvarEstimate cvar_batch(std::span<const double> u, const SampleBatch& samples, const RiskConfig& cfg);

/// Same estimator on already-projected scalar values.
CvarEstimate cvar_of_values(std::vector<double> values, double alpha);

struct GaussianRisk {
    double var = 0.0;
    double cvar = 0.0;
};

/// Closed form for X ~ N(mu, sigma^2): var = mu + sigma q, cvar = mu + sigma phi(q)/(1-alpha), q = Phi^{-1}(alpha).
GaussianRisk gaussian_cvar_oracle(double mu, double sigma, double alpha);

/// psi for X ~ N(mu, sigma^2) at a given theta, in closed form.
double gaussian_psi(double mu, double sigma, double theta, double alpha);

} // namespace cvarsmd

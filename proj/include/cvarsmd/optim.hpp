#pragma once

// Stochastic optimisers for min over (u, theta) in simplex x R of p_lambda:
//  - biased stochastic mirror descent (entropic mirror map on u, Euclidean on theta),
//  - projected stochastic gradient descent with exact simplex projection,
//  - mini-batch Monte-Carlo mirror descent.
// All three share one loop, one seed discipline (iteration k draws from the
// substream (seed, Iteration, k)) and one step-weighted Cesaro average.

#include "cvarsmd/cvar.hpp"
#include "cvarsmd/sampler.hpp"
#include "cvarsmd/simplex.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cvarsmd {

/// Running sums behind the on-line expected-return and CV@R estimates
///   ER ~ (1/n) sum <u_k, z^k>,  CV@R ~ (1/n) sum theta_k + (<z^k,u_k> - theta_k)^+ / (1 - alpha).
struct OnlineEstimates {
    std::uint64_t count = 0;
    double er_sum = 0.0;
    double er_sum_sq = 0.0;
    double cvar_sum = 0.0;
    double cvar_sum_sq = 0.0;

    void add(double er_term, double cvar_term);
    double er() const;
    double cvar() const;
    double er_std_err() const;
    double cvar_std_err() const;
};

struct SmdState {
    SimplexVector u;
    double theta = 0.0;
    std::uint64_t k = 0;

    // Cesaro average: weight eta_{k+1} on X_k, the point the k-th gradient is taken at.
    double cesaro_weight_sum = 0.0;
    std::vector<double> cesaro_u_sum;
    double cesaro_theta_sum = 0.0;

    OnlineEstimates online;

    static SmdState initial(SimplexVector u0, double theta0);

    /// Weighted average of the visited u; equals u while no step was taken.
    SimplexVector cesaro_u() const;
    double cesaro_theta() const;
};

/// u_i <- u_i exp(-eta g_u[i]) / sum_j u_j exp(-eta g_u[j]),  theta <- theta - eta g_theta.
/// The Cesaro sums absorb the pre-update point with weight eta.
/// Errors: NonFiniteGradient, InvalidParams (u not strictly positive, eta <= 0).
SmdState mirror_update(const SmdState& state, const SubgradientSample& g, double eta);

struct PsgdPoint {
    SimplexVector w;
    double theta = 0.0;
};

/// w <- project(w - eta g_u), theta <- theta - eta g_theta.
PsgdPoint psgd_step(const PsgdPoint& point, const SubgradientSample& g, double eta);

struct StepSchedule {
    enum class Kind { ConstantHorizon, Decreasing };

    Kind kind = Kind::ConstantHorizon;
    std::uint64_t iterations = 0; ///< horizon n

    // ConstantHorizon
    double eta = 0.0;
    int n_steps_cir = 1;

    // Decreasing: eta_k = k^-alpha_exp, h_k = h0 k^-beta_exp
    double alpha_exp = 0.51;
    double beta_exp = 3.1;
    double h0 = 1.0;
    /// Upper bound on the per-sample discretisation count; 0 means none.
    int max_steps_cir = 0;

    static StepSchedule constant(std::uint64_t n, double eta, int n_steps_cir);
    static StepSchedule decreasing(std::uint64_t n, double alpha_exp = 0.51, double beta_exp = 3.1, double h0 = 1.0);

    /// Throws InvalidParams when the schedule invariants fail
    /// (decreasing: alpha_exp in (1/2, 1], beta_exp > 0, alpha_exp + beta_exp/6 > 1).
    void validate() const;

    struct Step {
        double eta;
        int n_steps;
    };
    /// Step used by iteration k (0-based), i.e. (eta_{k+1}, N_{k+1}).
    Step at(std::uint64_t k) const;
};

/// Upper bound sqrt(theta_range^2/2 + log m) on the initial Bregman distance.
double default_delta_phi0_bound(double theta_range, std::size_t m);

/// Constant-step tuning for a horizon n: eta = bound / (2 sqrt(n+1)) and a
/// discretisation count ceil(c_h n^3) (at least 1), i.e. h close to n^-3.
/// Without a bound, default_delta_phi0_bound(1, m) is used.
StepSchedule tune_constant_schedule(std::uint64_t n, std::optional<double> delta_phi0_bound, std::size_t m,
                                    double c_h = 1e-6);

enum class Method { Smd, Psgd, Mcmd };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct InitialPoint {
    std::optional<SimplexVector> u0; ///< uniform when empty
    double theta0 = 0.0;
};

struct RunOptions {
    std::uint64_t thin_every = 0;  ///< snapshot stride; 0 keeps only the first and last point
    double theta_max = 1e6;        ///< Diverged once |theta| exceeds this
    std::size_t batch_size = 1;    ///< Mcmd only
    bool time_updates = false;     ///< measure the update phase separately from sampling
};

struct Snapshot {
    std::uint64_t k = 0;
    std::vector<double> u;
    double theta = 0.0;
    double online_er = 0.0;
    double online_cvar = 0.0;
    std::int64_t elapsed_ns = 0;
};

struct RunRecord {
    Method method = Method::Smd;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;
    StepSchedule schedule;
    RiskConfig risk;
    std::uint64_t model_hash = 0;
    std::vector<Snapshot> trajectory;
    SmdState final_state;
    std::int64_t elapsed_ns = 0;
    std::int64_t update_ns = 0; ///< time inside the weight/theta update (time_updates only)
};

/// Shared driver; the named wrappers below fix the method.
RunRecord run_optimizer(Method method, const ReturnSampler& sampler, const RiskConfig& cfg,
                        const StepSchedule& schedule, const InitialPoint& init,
                        std::uint64_t seed, const RunOptions& options = {});

RunRecord run_smd(const ReturnSampler& sampler, const RiskConfig& cfg, const StepSchedule& schedule,
                  const InitialPoint& init, std::uint64_t seed, const RunOptions& options = {});
RunRecord run_psgd(const ReturnSampler& sampler, const RiskConfig& cfg, const StepSchedule& schedule,
                   const InitialPoint& init, std::uint64_t seed, const RunOptions& options = {});
RunRecord run_mcmd(std::size_t batch_size, const ReturnSampler& sampler, const RiskConfig& cfg,
                   const StepSchedule& schedule, const InitialPoint& init, std::uint64_t seed,
                   const RunOptions& options = {});

/// Convenience overload sampling from the CIR + GBM model.
RunRecord run_smd(const PortfolioModel& model, const RiskConfig& cfg, const StepSchedule& schedule,
                  const InitialPoint& init, std::uint64_t seed, const RunOptions& options = {});

} // namespace cvarsmd

#include "cvarsmd/optim.hpp"

#include "cvarsmd/error.hpp"
#include "cvarsmd/rng.hpp"

#include <algorithm>
#include <chrono>
#include <climits>
#include <cmath>
#include <limits>

namespace cvarsmd {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t nanos_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

void require_finite_gradient(std::span<const double> g_u, double g_theta) {
    for (double g : g_u)
        if (!std::isfinite(g)) throw Error(ErrorCode::NonFiniteGradient, "subgradient has a non-finite u component");
    if (!std::isfinite(g_theta)) throw Error(ErrorCode::NonFiniteGradient, "subgradient has a non-finite theta component");
}

// Entropic mirror step on u with max-shifted exponents. Weights that underflow
// are floored at the smallest normal double so iterates stay interior.
void mirror_step(std::span<double> u, std::span<const double> g_u, double eta) {
    double shift = -std::numeric_limits<double>::infinity();
    for (double g : g_u) shift = std::max(shift, -eta * g);
    double sum = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] *= std::exp(-eta * g_u[i] - shift);
        if (!(u[i] > 0.0)) u[i] = std::numeric_limits<double>::min();
        sum += u[i];
    }
    for (double& w : u) w /= sum;
}

void accumulate_cesaro(SmdState& state, std::span<const double> u, double theta, double eta) {
    state.cesaro_weight_sum += eta;
    for (std::size_t i = 0; i < u.size(); ++i) state.cesaro_u_sum[i] += eta * u[i];
    state.cesaro_theta_sum += eta * theta;
}

void require_positive(std::span<const double> u) {
    for (double w : u)
        if (!(w > 0.0)) throw Error(ErrorCode::InvalidParams, "mirror descent needs strictly positive weights");
}

Snapshot snapshot_of(std::uint64_t k, std::span<const double> u, double theta, const OnlineEstimates& online,
                     std::int64_t elapsed) {
    Snapshot s;
    s.k = k;
    s.u.assign(u.begin(), u.end());
    s.theta = theta;
    s.online_er = online.count ? online.er() : 0.0;
    s.online_cvar = online.count ? online.cvar() : 0.0;
    s.elapsed_ns = elapsed;
    return s;
}

double mean_of(double sum, std::uint64_t n) { return n ? sum / static_cast<double>(n) : 0.0; }

double std_err_of(double sum, double sum_sq, std::uint64_t n) {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double var = std::max(0.0, (sum_sq - sum * sum / nn) / (nn - 1.0));
    return std::sqrt(var / nn);
}

} // namespace

void OnlineEstimates::add(double er_term, double cvar_term) {
    ++count;
    er_sum += er_term;
    er_sum_sq += er_term * er_term;
    cvar_sum += cvar_term;
    cvar_sum_sq += cvar_term * cvar_term;
}

double OnlineEstimates::er() const { return mean_of(er_sum, count); }
double OnlineEstimates::cvar() const { return mean_of(cvar_sum, count); }
double OnlineEstimates::er_std_err() const { return std_err_of(er_sum, er_sum_sq, count); }
double OnlineEstimates::cvar_std_err() const { return std_err_of(cvar_sum, cvar_sum_sq, count); }

SmdState SmdState::initial(SimplexVector u0, double theta0) {
    SmdState s;
    s.cesaro_u_sum.assign(u0.size(), 0.0);
    s.u = std::move(u0);
    s.theta = theta0;
    return s;
}

SimplexVector SmdState::cesaro_u() const {
    if (!(cesaro_weight_sum > 0.0)) return u;
    return SimplexVector::normalized(cesaro_u_sum);
}

double SmdState::cesaro_theta() const {
    return cesaro_weight_sum > 0.0 ? cesaro_theta_sum / cesaro_weight_sum : theta;
}

SmdState mirror_update(const SmdState& state, const SubgradientSample& g, double eta) {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::InvalidParams, "step size must be > 0");
    if (g.g_u.size() != state.u.size()) throw Error(ErrorCode::DimensionMismatch, "gradient dimension mismatch");
    require_finite_gradient(g.g_u, g.g_theta);
    require_positive(state.u.weights());

    SmdState next = state;
    accumulate_cesaro(next, state.u.weights(), state.theta, eta);
    std::vector<double> u = state.u.vector();
    mirror_step(u, g.g_u, eta);
    next.u = SimplexVector::from_weights(std::move(u));
    next.theta = state.theta - eta * g.g_theta;
    next.k = state.k + 1;
    return next;
}

PsgdPoint psgd_step(const PsgdPoint& point, const SubgradientSample& g, double eta) {
    if (g.g_u.size() != point.w.size()) throw Error(ErrorCode::DimensionMismatch, "gradient dimension mismatch");
    std::vector<double> y = point.w.vector();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= eta * g.g_u[i];
    std::vector<double> scratch;
    simplex_project_inplace(y, scratch);
    return PsgdPoint{SimplexVector::from_weights(std::move(y)), point.theta - eta * g.g_theta};
}

StepSchedule StepSchedule::constant(std::uint64_t n, double eta, int n_steps_cir) {
    StepSchedule s;
    s.kind = Kind::ConstantHorizon;
    s.iterations = n;
    s.eta = eta;
    s.n_steps_cir = n_steps_cir;
    return s;
}

StepSchedule StepSchedule::decreasing(std::uint64_t n, double alpha_exp, double beta_exp, double h0) {
    StepSchedule s;
    s.kind = Kind::Decreasing;
    s.iterations = n;
    s.alpha_exp = alpha_exp;
    s.beta_exp = beta_exp;
    s.h0 = h0;
    return s;
}

void StepSchedule::validate() const {
    if (max_steps_cir < 0) throw Error(ErrorCode::InvalidParams, "max_steps_cir must be >= 0");
    if (kind == Kind::ConstantHorizon) {
        if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorCode::InvalidParams, "schedule.eta must be > 0");
        if (n_steps_cir < 1) throw Error(ErrorCode::InvalidParams, "schedule.n_steps_cir must be >= 1");
        return;
    }
    if (!(alpha_exp > 0.5 && alpha_exp <= 1.0))
        throw Error(ErrorCode::InvalidParams, "schedule.alpha_exp must lie in (1/2, 1]");
    if (!(beta_exp > 0.0)) throw Error(ErrorCode::InvalidParams, "schedule.beta_exp must be > 0");
    if (!(alpha_exp + beta_exp / 6.0 > 1.0))
        throw Error(ErrorCode::InvalidParams, "schedule needs alpha_exp + beta_exp/6 > 1");
    if (!(h0 > 0.0)) throw Error(ErrorCode::InvalidParams, "schedule.h0 must be > 0");
}

StepSchedule::Step StepSchedule::at(std::uint64_t k) const {
    if (kind == Kind::ConstantHorizon) return {eta, n_steps_cir};
    const double index = static_cast<double>(k + 1);
    const double step_eta = std::pow(index, -alpha_exp);
    const double h = h0 * std::pow(index, -beta_exp);
    double steps = std::max(1.0, std::round(1.0 / h));
    if (max_steps_cir > 0) steps = std::min(steps, static_cast<double>(max_steps_cir));
    if (steps > static_cast<double>(INT_MAX))
        throw Error(ErrorCode::InvalidParams, "discretisation count overflows at iteration " + std::to_string(k)
                                                  + "; set schedule.max_steps_cir");
    return {step_eta, static_cast<int>(steps)};
}

double default_delta_phi0_bound(double theta_range, std::size_t m) {
    return std::sqrt(theta_range * theta_range / 2.0 + std::log(static_cast<double>(m)));
}

StepSchedule tune_constant_schedule(std::uint64_t n, std::optional<double> delta_phi0_bound, std::size_t m,
                                    double c_h) {
    const double bound = delta_phi0_bound.value_or(default_delta_phi0_bound(1.0, m));
    if (!(bound > 0.0)) throw Error(ErrorCode::InvalidParams, "delta_phi0_bound must be > 0");
    if (!(c_h > 0.0)) throw Error(ErrorCode::InvalidParams, "c_h must be > 0");
    const double nn = static_cast<double>(n);
    const double eta = bound / (2.0 * std::sqrt(nn + 1.0));
    // The 1e-9 slack keeps exact products such as 1e6 * 1e-6 from rounding up to 2.
    const double steps = std::max(1.0, std::ceil(c_h * nn * nn * nn - 1e-9));
    if (steps > static_cast<double>(INT_MAX))
        throw Error(ErrorCode::InvalidParams, "tuned discretisation count exceeds INT_MAX; lower c_h");
    return StepSchedule::constant(n, eta, static_cast<int>(steps));
}

std::string to_string(Method method) {
    switch (method) {
    case Method::Smd: return "smd";
    case Method::Psgd: return "psgd";
    case Method::Mcmd: return "mcmd";
    }
    return "smd";
}

Method method_from_string(const std::string& name) {
    if (name == "smd") return Method::Smd;
    if (name == "psgd") return Method::Psgd;
    if (name == "mcmd") return Method::Mcmd;
    throw Error(ErrorCode::Config, "unknown method '" + name + "' (expected smd, psgd or mcmd)");
}

RunRecord run_optimizer(Method method, const ReturnSampler& sampler, const RiskConfig& cfg,
                        const StepSchedule& schedule, const InitialPoint& init, std::uint64_t seed,
                        const RunOptions& options) {
    cfg.validate();
    schedule.validate();
    const std::size_t m = sampler.dim();
    SimplexVector u0 = init.u0.value_or(SimplexVector::uniform(m));
    if (u0.size() != m) throw Error(ErrorCode::DimensionMismatch, "initial weights do not match sampler dimension");
    if (method != Method::Psgd) require_positive(u0.weights());
    if (!std::isfinite(init.theta0)) throw Error(ErrorCode::InvalidParams, "theta0 must be finite");
    const std::size_t batch = method == Method::Mcmd ? options.batch_size : 1;
    if (batch < 1) throw Error(ErrorCode::InvalidParams, "batch size must be >= 1");

    RunRecord record;
    record.method = method;
    record.batch_size = batch;
    record.seed = seed;
    record.schedule = schedule;
    record.risk = cfg;
    record.model_hash = sampler.fingerprint();

    SmdState state = SmdState::initial(u0, init.theta0);
    std::vector<double> u = u0.vector();
    double theta = init.theta0;
    std::vector<double> z(m), g(m), g_sum(m), scratch;
    const double tail_scale = 1.0 / (1.0 - cfg.alpha);
    const double inv_batch = 1.0 / static_cast<double>(batch);

    record.trajectory.push_back(snapshot_of(0, u, theta, state.online, 0));
    const auto start = Clock::now();
    std::int64_t update_ns = 0;

    const std::uint64_t n = schedule.iterations;
    for (std::uint64_t k = 0; k < n; ++k) {
        const auto step = schedule.at(k);
        Engine rng = make_engine(seed, Stream::Iteration, k);

        std::fill(g_sum.begin(), g_sum.end(), 0.0);
        double g_theta_sum = 0.0;
        double er_term = 0.0;
        double cvar_term = 0.0;
        for (std::size_t j = 0; j < batch; ++j) {
            sampler.draw(rng, step.n_steps, z);
            double g_theta = 0.0;
            subgradient_into(u, theta, z, cfg, g, g_theta);
            for (std::size_t i = 0; i < m; ++i) g_sum[i] += g[i];
            g_theta_sum += g_theta;
            er_term += tail_value(z, u, LossConvention::AsWritten);
            cvar_term += theta + tail_scale * std::max(0.0, tail_value(z, u, cfg.convention) - theta);
        }
        for (double& x : g_sum) x *= inv_batch;
        g_theta_sum *= inv_batch;
        state.online.add(er_term * inv_batch, cvar_term * inv_batch);
        require_finite_gradient(g_sum, g_theta_sum);

        accumulate_cesaro(state, u, theta, step.eta);

        const auto update_start = options.time_updates ? Clock::now() : Clock::time_point{};
        if (method == Method::Psgd) {
            for (std::size_t i = 0; i < m; ++i) u[i] -= step.eta * g_sum[i];
            simplex_project_inplace(u, scratch);
        } else {
            mirror_step(u, g_sum, step.eta);
        }
        theta -= step.eta * g_theta_sum;
        if (options.time_updates) update_ns += nanos_since(update_start);

        if (!(std::abs(theta) <= options.theta_max))
            throw Error(ErrorCode::Diverged, "theta left [-" + std::to_string(options.theta_max) + ", "
                                                 + std::to_string(options.theta_max) + "] at iteration "
                                                 + std::to_string(k + 1));
        state.k = k + 1;
        if (options.thin_every > 0 && (k + 1) % options.thin_every == 0 && k + 1 != n)
            record.trajectory.push_back(snapshot_of(k + 1, u, theta, state.online, nanos_since(start)));
    }
    record.elapsed_ns = nanos_since(start);
    record.update_ns = update_ns;
    if (n > 0) record.trajectory.push_back(snapshot_of(n, u, theta, state.online, record.elapsed_ns));

    state.u = SimplexVector::from_weights(std::move(u), 1e-9);
    state.theta = theta;
    record.final_state = std::move(state);
    return record;
}

RunRecord run_smd(const ReturnSampler& sampler, const RiskConfig& cfg, const StepSchedule& schedule,
                  const InitialPoint& init, std::uint64_t seed, const RunOptions& options) {
    return run_optimizer(Method::Smd, sampler, cfg, schedule, init, seed, options);
}

RunRecord run_psgd(const ReturnSampler& sampler, const RiskConfig& cfg, const StepSchedule& schedule,
                   const InitialPoint& init, std::uint64_t seed, const RunOptions& options) {
    return run_optimizer(Method::Psgd, sampler, cfg, schedule, init, seed, options);
}

RunRecord run_mcmd(std::size_t batch_size, const ReturnSampler& sampler, const RiskConfig& cfg,
                   const StepSchedule& schedule, const InitialPoint& init, std::uint64_t seed,
                   const RunOptions& options) {
    RunOptions opts = options;
    opts.batch_size = batch_size;
    return run_optimizer(Method::Mcmd, sampler, cfg, schedule, init, seed, opts);
}

RunRecord run_smd(const PortfolioModel& model, const RiskConfig& cfg, const StepSchedule& schedule,
                  const InitialPoint& init, std::uint64_t seed, const RunOptions& options) {
    const PortfolioSampler sampler(model);
    return run_smd(sampler, cfg, schedule, init, seed, options);
}

} // namespace cvarsmd

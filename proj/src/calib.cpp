#include "cvarsmd/calib.hpp"

#include "cvarsmd/csv.hpp"
#include "cvarsmd/error.hpp"
#include "cvarsmd/parallel.hpp"
#include "cvarsmd/rng.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

namespace cvarsmd {

namespace {

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

bool is_iso_date(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (s[i] < '0' || s[i] > '9') return false;
    auto num = [&](std::size_t pos, std::size_t len) {
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) v = v * 10 + (s[i] - '0');
        return v;
    };
    const std::chrono::year_month_day ymd{std::chrono::year{num(0, 4)}, std::chrono::month{static_cast<unsigned>(num(5, 2))},
                                          std::chrono::day{static_cast<unsigned>(num(8, 2))}};
    return ymd.ok();
}

double mean_of(std::span<const double> x) {
    return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

} // namespace

void PriceSeries::validate(std::size_t min_length) const {
    if (dates.size() != prices.size())
        throw Error(ErrorCode::DimensionMismatch, asset_id + ": dates and prices differ in length");
    if (prices.size() < min_length)
        throw Error(ErrorCode::SeriesTooShort, asset_id + ": need at least " + std::to_string(min_length)
                                                   + " observations, got " + std::to_string(prices.size()));
    if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidParams, asset_id + ": dt must be > 0");
    for (std::size_t i = 0; i < prices.size(); ++i) {
        if (!(prices[i] > 0.0) || !std::isfinite(prices[i]))
            throw Error(ErrorCode::NonPositivePrice, asset_id + ": non-positive value on " + dates[i]);
        if (i > 0 && !(dates[i - 1] < dates[i]))
            throw Error(ErrorCode::MalformedInput, asset_id + ": dates not strictly increasing at " + dates[i]);
    }
}

PriceSeries parse_price_csv(std::istream& in, const std::string& source, std::string asset_id, double dt,
                            bool percent) {
    PriceSeries series;
    series.asset_id = std::move(asset_id);
    series.dt = dt;
    std::string line;
    std::size_t line_no = 0;
    auto strip_cr = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, where(source, 1) + "empty file");
    ++line_no;
    strip_cr(line);
    if (line != "date,close")
        throw Error(ErrorCode::MalformedInput, where(source, 1) + "expected header 'date,close', got '" + line + "'");
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) throw Error(ErrorCode::MalformedInput, where(source, line_no) + "empty row");
        std::vector<std::string> fields;
        try {
            fields = split_csv_record(line);
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedInput, where(source, line_no) + e.what());
        }
        if (fields.size() != 2)
            throw Error(ErrorCode::MalformedInput, where(source, line_no) + "expected 2 fields, got "
                                                       + std::to_string(fields.size()));
        if (!is_iso_date(fields[0]))
            throw Error(ErrorCode::MalformedInput, where(source, line_no) + "invalid ISO-8601 date '" + fields[0] + "'");
        const std::string& text = fields[1];
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() || !std::isfinite(value))
            throw Error(ErrorCode::MalformedInput, where(source, line_no) + "invalid number '" + text + "'");
        if (!(value > 0.0))
            throw Error(ErrorCode::NonPositivePrice, where(source, line_no) + "value must be > 0, got '" + text + "'");
        if (!series.dates.empty() && !(series.dates.back() < fields[0]))
            throw Error(ErrorCode::MalformedInput, where(source, line_no) + "date " + fields[0]
                                                       + " does not follow " + series.dates.back());
        series.dates.push_back(fields[0]);
        series.prices.push_back(percent ? value / 100.0 : value);
    }
    return series;
}

PriceSeries read_price_csv(const std::filesystem::path& path, std::string asset_id, double dt, bool percent) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return parse_price_csv(in, path.string(), std::move(asset_id), dt, percent);
}

std::vector<double> log_returns(const PriceSeries& series) {
    std::vector<double> x;
    x.reserve(series.size() > 0 ? series.size() - 1 : 0);
    for (std::size_t i = 1; i < series.size(); ++i) x.push_back(std::log(series.prices[i] / series.prices[i - 1]));
    return x;
}

GbmEstimate estimate_gbm(const PriceSeries& series) {
    series.validate(3);
    const auto x = log_returns(series);
    GbmEstimate est;
    est.n_returns = x.size();
    const double n = static_cast<double>(x.size());
    est.sigma = sample_sd(x) / std::sqrt(series.dt);
    est.mu = mean_of(x) / series.dt + 0.5 * est.sigma * est.sigma;
    est.sigma_se = est.sigma / std::sqrt(2.0 * n);
    est.mu_se = est.sigma / std::sqrt(n * series.dt);
    return est;
}

std::vector<PriceSeries> align_series(const std::vector<PriceSeries>& series, std::size_t min_rows) {
    if (series.empty()) return {};
    std::map<std::string, std::size_t> counts;
    for (const auto& s : series)
        for (const auto& d : s.dates) ++counts[d];
    std::vector<PriceSeries> out;
    out.reserve(series.size());
    for (const auto& s : series) {
        PriceSeries a;
        a.asset_id = s.asset_id;
        a.dt = s.dt;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (counts[s.dates[i]] == series.size()) {
                a.dates.push_back(s.dates[i]);
                a.prices.push_back(s.prices[i]);
            }
        }
        out.push_back(std::move(a));
    }
    if (out.front().size() < min_rows)
        throw Error(ErrorCode::InsufficientOverlap, "only " + std::to_string(out.front().size())
                                                        + " common dates across series, need "
                                                        + std::to_string(min_rows));
    return out;
}

Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& corr, double floor) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    Eigen::VectorXd values = eig.eigenvalues().cwiseMax(floor);
    Eigen::MatrixXd m = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    const Eigen::VectorXd inv_sd = m.diagonal().cwiseSqrt().cwiseInverse();
    m = inv_sd.asDiagonal() * m * inv_sd.asDiagonal();
    Eigen::MatrixXd out = 0.5 * (m + m.transpose());
    out.diagonal().setOnes();
    return out;
}

CorrelationEstimate estimate_correlation(const std::vector<std::vector<double>>& columns) {
    const std::size_t k = columns.size();
    if (k == 0) throw Error(ErrorCode::DimensionMismatch, "no columns");
    const std::size_t n = columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n) throw Error(ErrorCode::DimensionMismatch, "columns differ in length");
    if (n < 3) throw Error(ErrorCode::InsufficientOverlap, "need at least 3 aligned observations");

    CorrelationEstimate est;
    std::vector<std::vector<double>> centred(k);
    std::vector<double> ss(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double m = mean_of(columns[i]);
        centred[i].resize(n);
        for (std::size_t t = 0; t < n; ++t) {
            centred[i][t] = columns[i][t] - m;
            ss[i] += centred[i][t] * centred[i][t];
        }
        if (ss[i] == 0.0) est.warnings.push_back("column " + std::to_string(i) + " is constant; its correlations are set to 0");
    }
    est.pearson = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            double r = 0.0;
            if (ss[i] > 0.0 && ss[j] > 0.0) {
                double sxy = 0.0;
                for (std::size_t t = 0; t < n; ++t) sxy += centred[i][t] * centred[j][t];
                r = std::clamp(sxy / std::sqrt(ss[i] * ss[j]), -1.0, 1.0);
            }
            est.pearson(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
            est.pearson(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
        }
    }
    est.corr = est.pearson;
    bool pd = true;
    try {
        cholesky_factor(est.corr);
    } catch (const Error&) {
        pd = false;
    }
    if (pd) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(est.corr, Eigen::EigenvaluesOnly);
        pd = eig.eigenvalues().minCoeff() >= 1e-8;
    }
    if (!pd) {
        est.corr = repair_correlation(est.pearson);
        est.repaired = true;
        est.warnings.push_back("correlation matrix was not positive definite; eigenvalues floored at 1e-8");
    }
    return est;
}

CirFit fit_cir_ar1(const std::vector<double>& rates, double dt) {
    if (rates.size() < 3) throw Error(ErrorCode::SeriesTooShort, "need at least 3 rates");
    const std::size_t n = rates.size() - 1;
    std::span<const double> x(rates.data(), n);
    std::span<const double> y(rates.data() + 1, n);
    const double mx = mean_of(x);
    const double my = mean_of(y);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        sxx += (x[t] - mx) * (x[t] - mx);
        sxy += (x[t] - mx) * (y[t] - my);
    }
    CirFit fit;
    fit.r_last = rates.back();
    fit.phi = sxx > 0.0 ? sxy / sxx : 1.0;
    fit.intercept = sxx > 0.0 ? my - fit.phi * mx : 0.0;
    fit.stable = fit.phi > 0.0 && fit.phi < 1.0;

    std::vector<double> e(n);
    for (std::size_t t = 0; t < n; ++t) e[t] = y[t] - fit.intercept - fit.phi * x[t];
    const double dof = n > 2 ? static_cast<double>(n - 2) : 1.0;

    std::vector<double> v(n);
    if (fit.stable) {
        fit.a = -std::log(fit.phi) / dt;
        fit.b = fit.intercept / (1.0 - fit.phi);
        const double slope = fit.phi * (1.0 - fit.phi) / fit.a;
        const double level = fit.b * (1.0 - fit.phi) * (1.0 - fit.phi) / (2.0 * fit.a);
        for (std::size_t t = 0; t < n; ++t) v[t] = x[t] * slope + level;
    } else {
        fit.a = 0.0;
        fit.b = mean_of(rates);
        for (std::size_t t = 0; t < n; ++t) v[t] = x[t] * dt;
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += v[t] > 0.0 ? e[t] * e[t] / v[t] : 0.0;
    const double s2 = acc / dof;
    fit.sigma0 = std::sqrt(std::max(0.0, s2));
    fit.standardized_residuals.resize(n);
    for (std::size_t t = 0; t < n; ++t)
        fit.standardized_residuals[t] = (s2 > 0.0 && v[t] > 0.0) ? e[t] / std::sqrt(s2 * v[t]) : 0.0;
    return fit;
}

CirEstimate estimate_cir(const PriceSeries& rates, const CirEstimateOptions& options) {
    rates.validate(10);
    const CirFit fit = fit_cir_ar1(rates.prices, rates.dt);
    if (!fit.stable)
        throw Error(ErrorCode::UnstableEstimate, rates.asset_id + ": AR(1) slope " + format_double(fit.phi)
                                                     + " outside (0, 1); mean reversion is not identifiable");
    if (!(fit.b > 0.0))
        throw Error(ErrorCode::UnstableEstimate, rates.asset_id + ": estimated long-run mean is not positive");

    CirEstimate est;
    est.params = CirParams{fit.a, fit.b, fit.sigma0, fit.r_last};
    est.standardized_residuals = fit.standardized_residuals;
    if (!(fit.sigma0 > 0.0)) est.warnings.push_back("estimated sigma0 is zero");

    if (options.bootstrap == 0) return est;
    if (!est.params.scheme_well_defined() || options.substeps < 1) {
        est.warnings.push_back("bootstrap skipped: 4ab - sigma0^2 <= 0 for the fitted parameters");
        return est;
    }
    const std::size_t reps = options.bootstrap;
    const std::size_t len = rates.size();
    const double h = rates.dt / options.substeps;
    const CirStepper step(est.params, h);
    std::vector<CirFit> fits(reps);
    parallel_for(reps, options.threads, [&](std::size_t i) {
        Engine rng = make_engine(options.seed, Stream::Bootstrap, i);
        std::normal_distribution<double> normal(0.0, std::sqrt(h));
        std::vector<double> path(len);
        double r = rates.prices.front();
        path[0] = r;
        for (std::size_t t = 1; t < len; ++t) {
            for (int s = 0; s < options.substeps; ++s) r = step(r, normal(rng));
            path[t] = r;
        }
        fits[i] = fit_cir_ar1(path, rates.dt);
        fits[i].standardized_residuals.clear();
    });
    std::vector<double> as, bs, ss;
    for (const auto& f : fits) {
        if (!f.stable) continue;
        as.push_back(f.a);
        bs.push_back(f.b);
        ss.push_back(f.sigma0);
    }
    est.bootstrap_draws = as.size();
    if (as.size() < reps)
        est.warnings.push_back(std::to_string(reps - as.size()) + " of " + std::to_string(reps)
                               + " bootstrap fits were unstable and were dropped");
    est.a_se = sample_sd(as);
    est.b_se = sample_sd(bs);
    est.sigma0_se = sample_sd(ss);
    return est;
}

CalibrationReport calibrate(const PriceSeries& rates, const std::vector<PriceSeries>& assets,
                            const CirEstimateOptions& options) {
    std::vector<PriceSeries> all;
    all.reserve(assets.size() + 1);
    all.push_back(rates);
    all.insert(all.end(), assets.begin(), assets.end());
    for (const auto& s : all) s.validate(3);
    const auto aligned = align_series(all, 10);

    CalibrationReport report;
    report.n_obs = aligned.front().size();
    report.cir_method = "ar1-conditional-moment-matching";
    for (const auto& s : aligned) report.asset_ids.push_back(s.asset_id);
    if (aligned.front().size() < rates.size())
        report.warnings.push_back(std::to_string(rates.size() - aligned.front().size())
                                  + " rate observations dropped by date alignment");

    const CirEstimate cir = estimate_cir(aligned.front(), options);
    report.model.cir = cir.params;
    report.warnings.insert(report.warnings.end(), cir.warnings.begin(), cir.warnings.end());
    report.standard_errors.push_back({"cir.a", cir.params.a, cir.a_se});
    report.standard_errors.push_back({"cir.b", cir.params.b, cir.b_se});
    report.standard_errors.push_back({"cir.sigma0", cir.params.sigma0, cir.sigma0_se});

    std::vector<std::vector<double>> columns{cir.standardized_residuals};
    for (std::size_t i = 1; i < aligned.size(); ++i) {
        const GbmEstimate g = estimate_gbm(aligned[i]);
        report.model.gbm_mu.push_back(g.mu);
        report.model.gbm_sigma.push_back(g.sigma);
        report.standard_errors.push_back({"gbm_mu[" + aligned[i].asset_id + "]", g.mu, g.mu_se});
        report.standard_errors.push_back({"gbm_sigma[" + aligned[i].asset_id + "]", g.sigma, g.sigma_se});
        columns.push_back(log_returns(aligned[i]));
    }
    const CorrelationEstimate corr = estimate_correlation(columns);
    report.model.corr = corr.corr;
    report.warnings.insert(report.warnings.end(), corr.warnings.begin(), corr.warnings.end());

    report.rate_conditions_satisfied = report.model.cir.satisfies_rate_conditions();
    if (!report.rate_conditions_satisfied)
        report.warnings.push_back("estimated CIR parameters violate a b > sigma0^2 or a > 2 sqrt(2) sigma0");
    report.model.validate();
    return report;
}

} // namespace cvarsmd

#include "cvarsmd/cli.hpp"

#include "cvarsmd/calib.hpp"
#include "cvarsmd/csv.hpp"
#include "cvarsmd/error.hpp"
#include "cvarsmd/hash.hpp"
#include "cvarsmd/parallel.hpp"
#include "cvarsmd/rng.hpp"

#include <CLI11.hpp>

#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace cvarsmd {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::NoFeasiblePoint: return Infeasible;
    case ErrorCode::Diverged:
    case ErrorCode::NonFiniteGradient: return Internal;
    default: return ConfigInvalid;
    }
}

namespace {

std::string field_path(const std::string& parent, const std::string& key) {
    return parent.empty() ? key : parent + "." + key;
}

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::Config, message); }

const json& require_field(const json& obj, const std::string& key, const std::string& parent) {
    if (!obj.is_object()) config_error("field '" + (parent.empty() ? std::string("<root>") : parent) + "' must be an object");
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) config_error("missing required field '" + field_path(parent, key) + "'");
    return *it;
}

const json* find_field(const json& obj, const std::string& key) {
    if (!obj.is_object()) return nullptr;
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number()) config_error("field '" + path + "' must be a number");
    return v.get<double>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    config_error("field '" + path + "' must be a nonnegative integer");
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) config_error("field '" + path + "' must be a string");
    return v.get<std::string>();
}

double req_double(const json& obj, const std::string& key, const std::string& parent) {
    return as_double(require_field(obj, key, parent), field_path(parent, key));
}

double opt_double(const json& obj, const std::string& key, const std::string& parent, double fallback) {
    const json* v = find_field(obj, key);
    return v ? as_double(*v, field_path(parent, key)) : fallback;
}

std::uint64_t req_u64(const json& obj, const std::string& key, const std::string& parent) {
    return as_u64(require_field(obj, key, parent), field_path(parent, key));
}

std::uint64_t opt_u64(const json& obj, const std::string& key, const std::string& parent, std::uint64_t fallback) {
    const json* v = find_field(obj, key);
    return v ? as_u64(*v, field_path(parent, key)) : fallback;
}

int as_int(std::uint64_t v, const std::string& path) {
    if (v > static_cast<std::uint64_t>(INT_MAX)) config_error("field '" + path + "' is too large");
    return static_cast<int>(v);
}

std::vector<double> as_doubles(const json& v, const std::string& path) {
    if (!v.is_array()) config_error("field '" + path + "' must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        config_error(path.string() + ": " + e.what());
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

StepSchedule parse_schedule(const json& j, std::size_t m) {
    const std::string p = "schedule";
    const std::string kind = as_string(require_field(j, "kind", p), p + ".kind");
    const std::uint64_t n = req_u64(j, "iterations", p);
    StepSchedule s;
    if (kind == "constant") {
        s = StepSchedule::constant(n, req_double(j, "eta", p), as_int(req_u64(j, "n_steps_cir", p), p + ".n_steps_cir"));
    } else if (kind == "decreasing") {
        s = StepSchedule::decreasing(n, opt_double(j, "alpha_exp", p, 0.51), opt_double(j, "beta_exp", p, 3.1),
                                     opt_double(j, "h0", p, 1.0));
        s.max_steps_cir = as_int(opt_u64(j, "max_steps_cir", p, 0), p + ".max_steps_cir");
    } else if (kind == "tuned") {
        std::optional<double> bound;
        if (const json* b = find_field(j, "delta_phi0_bound")) bound = as_double(*b, p + ".delta_phi0_bound");
        s = tune_constant_schedule(n, bound, m, opt_double(j, "c_h", p, 1e-6));
    } else {
        config_error("field 'schedule.kind' must be one of constant, decreasing, tuned (got '" + kind + "')");
    }
    s.validate();
    return s;
}

RiskConfig parse_risk(const json& j) {
    const std::string p = "risk";
    RiskConfig r;
    r.alpha = opt_double(j, "alpha", p, 0.05);
    r.lambda = req_double(j, "lambda", p);
    if (const json* c = find_field(j, "loss_convention")) {
        const std::string conv = as_string(*c, p + ".loss_convention");
        if (conv == "as_written") r.convention = LossConvention::AsWritten;
        else if (conv == "negated_returns") r.convention = LossConvention::NegatedReturns;
        else config_error("field 'risk.loss_convention' must be as_written or negated_returns");
    }
    r.validate();
    return r;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

struct Context {
    ExperimentConfig cfg;
    unsigned threads = 1;
    std::ostream* out = nullptr;
    std::ostream* err = nullptr;
};

void write_manifest(const Context& ctx, const std::string& command, const json& options,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["options"] = options;
    m["seed"] = ctx.cfg.seed;
    m["config_hash"] = config_hash(ctx.cfg.source);
    m["config"] = ctx.cfg.source;
    if (ctx.cfg.model) m["resolved_model"] = model_to_json(*ctx.cfg.model);
    m["outputs"] = outputs;
    m["timing_outputs_excluded_from_determinism"] = true;
    write_json(ctx.cfg.output_dir / "manifest.json", m);
}

const PortfolioModel& require_model(const ExperimentConfig& cfg) {
    if (!cfg.model) config_error("missing required field 'model' (or 'model_path')");
    return *cfg.model;
}

const StepSchedule& require_schedule(const ExperimentConfig& cfg) {
    if (!cfg.schedule) config_error("missing required field 'schedule'");
    return *cfg.schedule;
}

std::uint64_t replication_seed(const ExperimentConfig& cfg, std::size_t r) {
    return cfg.replications == 1 ? cfg.seed : derive_seed(cfg.seed, Stream::Replication, r);
}

std::vector<std::string> weight_headers(const std::string& prefix, std::size_t m) {
    std::vector<std::string> h;
    for (std::size_t i = 0; i < m; ++i) h.push_back(prefix + std::to_string(i));
    return h;
}

json run_summary(const RunRecord& run, std::size_t replication) {
    const SmdState& s = run.final_state;
    return json{{"replication", replication},
                {"seed", run.seed},
                {"iterations", s.k},
                {"cesaro_u", s.cesaro_u().vector()},
                {"cesaro_theta", s.cesaro_theta()},
                {"final_u", s.u.vector()},
                {"final_theta", s.theta},
                {"online_er", s.online.er()},
                {"online_er_se", s.online.er_std_err()},
                {"online_cvar", s.online.cvar()},
                {"online_cvar_se", s.online.cvar_std_err()}};
}

int cmd_simulate(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const PortfolioSampler sampler(require_model(cfg));
    if (cfg.simulate_steps < 1) config_error("field 'simulate.n_steps_cir' must be >= 1");
    const std::size_t m = sampler.dim();
    const std::size_t n = cfg.simulate_samples;
    std::vector<double> data(n * m);
    parallel_for(n, ctx.threads, [&](std::size_t i) {
        Engine rng = make_engine(cfg.seed, Stream::Simulate, i);
        sampler.draw(rng, cfg.simulate_steps, std::span<double>(data.data() + i * m, m));
    });
    std::ostringstream csv;
    CsvWriter w(csv);
    const auto header = weight_headers("z_", m);
    w.row(header);
    std::vector<std::string> row(m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) row[j] = format_double(data[i * m + j]);
        w.row(row);
    }
    write_text(cfg.output_dir / "samples.csv", csv.str());
    write_manifest(ctx, "simulate", json{{"n_samples", n}, {"n_steps_cir", cfg.simulate_steps}}, {"samples.csv"});
    *ctx.out << "wrote " << n << " samples to " << (cfg.output_dir / "samples.csv").string() << "\n";
    return Ok;
}

int cmd_optimize(Context& ctx, Method method, std::size_t batch) {
    const auto& cfg = ctx.cfg;
    const PortfolioSampler sampler(require_model(cfg));
    const StepSchedule& schedule = require_schedule(cfg);
    const std::size_t m = sampler.dim();
    RunOptions opts;
    opts.thin_every = cfg.thin_every;
    opts.theta_max = cfg.theta_max;
    opts.batch_size = batch;

    std::vector<RunRecord> runs(cfg.replications);
    parallel_for(cfg.replications, ctx.threads, [&](std::size_t r) {
        runs[r] = run_optimizer(method, sampler, cfg.risk, schedule, cfg.init, replication_seed(cfg, r), opts);
    });

    std::ostringstream traj, timing;
    CsvWriter tw(traj), timew(timing);
    std::vector<std::string> header{"replication", "k"};
    for (auto& h : weight_headers("u_", m)) header.push_back(h);
    header.insert(header.end(), {"theta", "online_er", "online_cvar"});
    tw.row(header);
    timew.row({"replication", "k", "elapsed_ns"});
    json reps = json::array();
    json timing_json = json::array();
    for (std::size_t r = 0; r < runs.size(); ++r) {
        for (const Snapshot& s : runs[r].trajectory) {
            std::vector<std::string> row{std::to_string(r), std::to_string(s.k)};
            for (double u : s.u) row.push_back(format_double(u));
            row.push_back(format_double(s.theta));
            row.push_back(format_double(s.online_er));
            row.push_back(format_double(s.online_cvar));
            tw.row(row);
            timew.row({std::to_string(r), std::to_string(s.k), std::to_string(s.elapsed_ns)});
        }
        reps.push_back(run_summary(runs[r], r));
        timing_json.push_back({{"replication", r}, {"wall_time_ns", runs[r].elapsed_ns}});
    }
    json summary{{"method", to_string(method)},
                 {"batch_size", batch},
                 {"model_hash", hex64(sampler.fingerprint())},
                 {"replications", reps}};
    write_text(cfg.output_dir / "trajectory.csv", traj.str());
    write_json(cfg.output_dir / "summary.json", summary);
    write_text(cfg.output_dir / "trajectory_timing.csv", timing.str());
    write_json(cfg.output_dir / "timing.json", json{{"threads", ctx.threads}, {"runs", timing_json}});
    write_manifest(ctx, "optimize", json{{"method", to_string(method)}, {"batch_size", batch}},
                   {"trajectory.csv", "summary.json"});
    const SmdState& s = runs.front().final_state;
    *ctx.out << to_string(method) << ": online ER " << format_double(s.online.er()) << ", online CV@R "
             << format_double(s.online.cvar()) << "\n";
    return Ok;
}

int cmd_frontier(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const PortfolioModel& model = require_model(cfg);
    const StepSchedule& schedule = require_schedule(cfg);
    if (!cfg.grid) config_error("missing required field 'grid'");
    FrontierOptions opts;
    opts.threads = ctx.threads;
    opts.run.theta_max = cfg.theta_max;
    const FrontierResult res = sweep(model, cfg.risk, *cfg.grid, schedule, cfg.seed, opts);
    const std::size_t m = model.dim();

    std::optional<std::size_t> selected;
    std::string infeasible;
    try {
        selected = select_sharpe_index(res.points, res.er_riskfree);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoFeasiblePoint) throw;
        infeasible = e.what();
    }

    std::ostringstream csv;
    CsvWriter w(csv);
    std::vector<std::string> header{"lambda", "er", "er_se", "cvar", "cvar_se", "theta", "sharpe"};
    for (auto& h : weight_headers("w_", m)) header.push_back(h);
    header.insert(header.end(), {"seed", "status", "selected"});
    w.row(header);
    json points = json::array();
    for (std::size_t i = 0; i < res.points.size(); ++i) {
        const FrontierPoint& p = res.points[i];
        std::vector<std::string> row{format_double(p.lambda), format_double(p.er), format_double(p.er_se),
                                     format_double(p.cvar), format_double(p.cvar_se), format_double(p.theta),
                                     p.sharpe ? format_double(*p.sharpe) : std::string()};
        for (std::size_t j = 0; j < m; ++j) row.push_back(p.ok() ? format_double(p.weights[j]) : std::string());
        row.push_back(std::to_string(p.run_seed));
        row.push_back(p.ok() ? "ok" : "error: " + p.error);
        row.push_back(selected && *selected == i ? "1" : "0");
        w.row(row);
        points.push_back({{"lambda", p.lambda}, {"er", p.er}, {"er_se", p.er_se}, {"cvar", p.cvar},
                          {"cvar_se", p.cvar_se}, {"theta", p.theta}, {"weights", p.weights},
                          {"sharpe", p.sharpe ? json(*p.sharpe) : json()}, {"seed", p.run_seed},
                          {"status", p.ok() ? "ok" : p.error}});
    }
    json doc{{"er_riskfree", res.er_riskfree},
             {"er_riskfree_se", res.er_riskfree_se},
             {"riskfree_seed", res.riskfree_seed},
             {"selected_index", selected ? json(*selected) : json()},
             {"points", points},
             {"config", cfg.source}};
    write_text(cfg.output_dir / "frontier.csv", csv.str());
    write_json(cfg.output_dir / "frontier.json", doc);
    write_manifest(ctx, "frontier", json::object(), {"frontier.csv", "frontier.json"});
    if (!selected) {
        *ctx.err << "error: " << infeasible << "\n";
        return Infeasible;
    }
    const FrontierPoint& best = res.points[*selected];
    *ctx.out << "selected lambda " << format_double(best.lambda) << " (sharpe " << format_double(*best.sharpe)
             << ")\n";
    return Ok;
}

struct CalibrateInputs {
    std::string rates;
    std::vector<std::string> assets; ///< id=path
    bool percent = false;
    double dt = 1.0 / 252.0;
    std::uint64_t bootstrap = 200;
};

int cmd_calibrate(Context& ctx, CalibrateInputs in, const json* section, const fs::path& base_dir) {
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    std::vector<std::pair<std::string, fs::path>> assets;
    fs::path rates_path;
    if (section) {
        const std::string p = "calibrate";
        if (in.rates.empty()) rates_path = resolve(as_string(require_field(*section, "rates", p), p + ".rates"));
        if (in.assets.empty()) {
            const json& arr = require_field(*section, "assets", p);
            if (!arr.is_array()) config_error("field 'calibrate.assets' must be an array");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string ap = p + ".assets[" + std::to_string(i) + "]";
                assets.emplace_back(as_string(require_field(arr[i], "id", ap), ap + ".id"),
                                    resolve(as_string(require_field(arr[i], "path", ap), ap + ".path")));
            }
        }
        in.dt = opt_double(*section, "dt", p, in.dt);
        in.bootstrap = opt_u64(*section, "bootstrap", p, in.bootstrap);
        if (const json* pc = find_field(*section, "rates_in_percent")) {
            if (!pc->is_boolean()) config_error("field 'calibrate.rates_in_percent' must be a boolean");
            in.percent = in.percent || pc->get<bool>();
        }
    }
    if (!in.rates.empty()) rates_path = in.rates;
    for (const std::string& arg : in.assets) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos || eq == 0) config_error("--asset expects ID=PATH, got '" + arg + "'");
        assets.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
    }
    if (rates_path.empty()) config_error("missing required field 'calibrate.rates' (or --rates)");

    const PriceSeries rates = read_price_csv(rates_path, "rate", in.dt, in.percent);
    std::vector<PriceSeries> series;
    for (const auto& [id, path] : assets) series.push_back(read_price_csv(path, id, in.dt));
    CirEstimateOptions opts;
    opts.bootstrap = in.bootstrap;
    opts.seed = ctx.cfg.seed;
    opts.threads = ctx.threads;
    const CalibrationReport report = calibrate(rates, series, opts);

    json errors = json::array();
    for (const auto& e : report.standard_errors)
        errors.push_back({{"name", e.name}, {"value", e.value}, {"std_err", e.std_err}});
    json doc{{"model", model_to_json(report.model)},
             {"asset_ids", report.asset_ids},
             {"standard_errors", errors},
             {"n_obs", report.n_obs},
             {"rate_conditions_satisfied", report.rate_conditions_satisfied},
             {"cir_method", report.cir_method},
             {"warnings", report.warnings}};
    write_json(ctx.cfg.output_dir / "calibration.json", doc);
    json inputs{{"rates", rates_path.string()}, {"rates_in_percent", in.percent}, {"dt", in.dt},
                {"bootstrap", in.bootstrap}};
    json asset_inputs = json::array();
    for (const auto& [id, path] : assets) asset_inputs.push_back({{"id", id}, {"path", path.string()}});
    inputs["assets"] = asset_inputs;
    ctx.cfg.model = report.model;
    write_manifest(ctx, "calibrate", inputs, {"calibration.json"});
    for (const auto& w : report.warnings) *ctx.out << "warning: " << w << "\n";
    *ctx.out << "calibrated " << report.asset_ids.size() << " series over " << report.n_obs << " dates\n";
    return Ok;
}

int cmd_compare(Context& ctx) {
    const auto& cfg = ctx.cfg;
    const PortfolioSampler sampler(require_model(cfg));
    const StepSchedule& schedule = require_schedule(cfg);
    const std::size_t m = sampler.dim();
    struct Job {
        Method method;
        std::size_t batch;
    };
    const std::vector<Job> jobs{{Method::Smd, 1}, {Method::Psgd, 1}, {Method::Mcmd, cfg.batch_size}};
    RunOptions opts;
    opts.theta_max = cfg.theta_max;
    opts.time_updates = true;

    // Sequential on purpose: concurrent runs would distort the timings.
    std::vector<std::vector<RunRecord>> runs(jobs.size());
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        opts.batch_size = jobs[j].batch;
        for (std::size_t r = 0; r < cfg.replications; ++r)
            runs[j].push_back(
                run_optimizer(jobs[j].method, sampler, cfg.risk, schedule, cfg.init, replication_seed(cfg, r), opts));
    }

    std::ostringstream csv, timing;
    CsvWriter w(csv), tw(timing);
    std::vector<std::string> header{"method", "batch_size", "replication", "seed", "er", "er_se", "cvar", "cvar_se",
                                    "theta"};
    for (auto& h : weight_headers("w_", m)) header.push_back(h);
    w.row(header);
    tw.row({"method", "batch_size", "replication", "total_ns", "update_ns", "ns_per_iteration",
            "update_ns_per_iteration"});
    const double n_iter = std::max<double>(1.0, static_cast<double>(schedule.iterations));
    std::vector<double> total(jobs.size(), 0.0), update(jobs.size(), 0.0), er(jobs.size(), 0.0),
        cvar(jobs.size(), 0.0);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        for (std::size_t r = 0; r < runs[j].size(); ++r) {
            const RunRecord& run = runs[j][r];
            const SmdState& s = run.final_state;
            std::vector<std::string> row{to_string(jobs[j].method), std::to_string(jobs[j].batch), std::to_string(r),
                                         std::to_string(run.seed), format_double(s.online.er()),
                                         format_double(s.online.er_std_err()), format_double(s.online.cvar()),
                                         format_double(s.online.cvar_std_err()), format_double(s.cesaro_theta())};
            const SimplexVector avg = s.cesaro_u();
            for (double u : avg.vector()) row.push_back(format_double(u));
            w.row(row);
            tw.row({to_string(jobs[j].method), std::to_string(jobs[j].batch), std::to_string(r),
                    std::to_string(run.elapsed_ns), std::to_string(run.update_ns),
                    format_double(static_cast<double>(run.elapsed_ns) / n_iter),
                    format_double(static_cast<double>(run.update_ns) / n_iter)});
            total[j] += static_cast<double>(run.elapsed_ns);
            update[j] += static_cast<double>(run.update_ns);
            er[j] += s.online.er();
            cvar[j] += s.online.cvar();
        }
    }
    const double reps = static_cast<double>(std::max<std::size_t>(1, cfg.replications));
    auto rel = [](double a, double b) { return b != 0.0 ? std::abs(a - b) / std::abs(b) : std::abs(a - b); };
    json agreement{{"er_smd", er[0] / reps},
                   {"er_psgd", er[1] / reps},
                   {"cvar_smd", cvar[0] / reps},
                   {"cvar_psgd", cvar[1] / reps},
                   {"er_relative_difference", rel(er[1], er[0])},
                   {"cvar_relative_difference", rel(cvar[1], cvar[0])}};
    json ratios{{"threads", ctx.threads},
                {"psgd_over_smd_total", total[0] > 0 ? total[1] / total[0] : 0.0},
                {"psgd_over_smd_update", update[0] > 0 ? update[1] / update[0] : 0.0},
                {"mcmd_over_smd_total", total[0] > 0 ? total[2] / total[0] : 0.0}};
    write_text(cfg.output_dir / "compare.csv", csv.str());
    write_json(cfg.output_dir / "compare.json", agreement);
    write_text(cfg.output_dir / "compare_timing.csv", timing.str());
    write_json(cfg.output_dir / "compare_timing.json", ratios);
    write_manifest(ctx, "compare", json{{"mcmd_batch_size", cfg.batch_size}}, {"compare.csv", "compare.json"});
    *ctx.out << "psgd/smd wall-time ratio " << format_double(ratios["psgd_over_smd_total"].get<double>())
             << ", ER relative difference " << format_double(agreement["er_relative_difference"].get<double>())
             << "\n";
    return Ok;
}

} // namespace

json model_to_json(const PortfolioModel& model) {
    json corr = json::array();
    for (Eigen::Index i = 0; i < model.corr.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < model.corr.cols(); ++j) row.push_back(model.corr(i, j));
        corr.push_back(row);
    }
    return json{{"cir", {{"a", model.cir.a}, {"b", model.cir.b}, {"sigma0", model.cir.sigma0}, {"r0", model.cir.r0}}},
                {"gbm_mu", model.gbm_mu},
                {"gbm_sigma", model.gbm_sigma},
                {"corr", corr}};
}

PortfolioModel model_from_json(const json& j, const std::string& path) {
    PortfolioModel model;
    const std::string cp = field_path(path, "cir");
    const json& cir = require_field(j, "cir", path);
    model.cir = CirParams{req_double(cir, "a", cp), req_double(cir, "b", cp), req_double(cir, "sigma0", cp),
                          req_double(cir, "r0", cp)};
    model.gbm_mu = as_doubles(require_field(j, "gbm_mu", path), field_path(path, "gbm_mu"));
    model.gbm_sigma = as_doubles(require_field(j, "gbm_sigma", path), field_path(path, "gbm_sigma"));
    const std::string corr_path = field_path(path, "corr");
    const json& corr = require_field(j, "corr", path);
    if (!corr.is_array()) config_error("field '" + corr_path + "' must be a square array of arrays");
    const auto m = static_cast<Eigen::Index>(corr.size());
    model.corr.resize(m, m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const std::string rp = corr_path + "[" + std::to_string(r) + "]";
        const auto row = as_doubles(corr[static_cast<std::size_t>(r)], rp);
        if (static_cast<Eigen::Index>(row.size()) != m) config_error("field '" + rp + "' has the wrong length");
        for (Eigen::Index c = 0; c < m; ++c) model.corr(r, c) = row[static_cast<std::size_t>(c)];
    }
    try {
        model.validate();
    } catch (const Error& e) {
        config_error("field '" + path + "': " + e.what());
    }
    return model;
}

std::string config_hash(const json& doc) { return hex64(Fnv1a().bytes(doc.dump()).digest()); }

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) config_error("config must be a JSON object");
    ExperimentConfig cfg;
    cfg.source = doc;
    cfg.source.erase("output_dir");

    if (const json* m = find_field(doc, "model")) {
        cfg.model = model_from_json(*m, "model");
    } else if (const json* mp = find_field(doc, "model_path")) {
        fs::path p = as_string(*mp, "model_path");
        if (p.is_relative()) p = base_dir / p;
        const json loaded = read_json_file(p);
        const json* inner = find_field(loaded, "model");
        cfg.model = model_from_json(inner ? *inner : loaded, p.string() + ":model");
    }
    const std::size_t m = cfg.model ? cfg.model->dim() : 1;
    if (const json* r = find_field(doc, "risk")) cfg.risk = parse_risk(*r);
    if (const json* s = find_field(doc, "schedule")) cfg.schedule = parse_schedule(*s, m);
    if (const json* g = find_field(doc, "grid")) {
        LambdaGrid grid;
        grid.lambda_min = req_double(*g, "lambda_min", "grid");
        grid.lambda_max = req_double(*g, "lambda_max", "grid");
        grid.n_points = req_u64(*g, "n_points", "grid");
        try {
            grid.validate();
        } catch (const Error& e) {
            config_error(std::string("field 'grid': ") + e.what());
        }
        cfg.grid = grid;
    }
    if (const json* init = find_field(doc, "initial")) {
        cfg.init.theta0 = opt_double(*init, "theta0", "initial", 0.0);
        if (const json* u0 = find_field(*init, "u0")) {
            auto w = as_doubles(*u0, "initial.u0");
            if (w.size() != m) config_error("field 'initial.u0' must have one weight per asset");
            try {
                cfg.init.u0 = SimplexVector::from_weights(std::move(w), 1e-9);
            } catch (const Error& e) {
                config_error(std::string("field 'initial.u0': ") + e.what());
            }
        }
    }
    cfg.seed = opt_u64(doc, "seed", "", 0);
    if (const json* o = find_field(doc, "output_dir")) cfg.output_dir = as_string(*o, "output_dir");
    cfg.thin_every = opt_u64(doc, "thin_every", "", 0);
    cfg.replications = opt_u64(doc, "replications", "", 1);
    if (cfg.replications < 1) config_error("field 'replications' must be >= 1");
    cfg.theta_max = opt_double(doc, "theta_max", "", 1e6);
    if (!(cfg.theta_max > 0.0)) config_error("field 'theta_max' must be > 0");
    if (const json* c = find_field(doc, "compare")) cfg.batch_size = opt_u64(*c, "batch_size", "compare", 10);
    if (cfg.batch_size < 1) config_error("field 'compare.batch_size' must be >= 1");
    if (const json* s = find_field(doc, "simulate")) {
        cfg.simulate_samples = opt_u64(*s, "n_samples", "simulate", 0);
        cfg.simulate_steps = as_int(opt_u64(*s, "n_steps_cir", "simulate", 1), "simulate.n_steps_cir");
    }
    return cfg;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cvarsmd: portfolio weights under a CV@R penalty"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = default_thread_count();
    std::string method_name = "smd";
    std::optional<std::size_t> batch_size;
    std::optional<std::uint64_t> n_samples;
    CalibrateInputs calib_in;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", config_path, "JSON experiment config");
        if (config_required) opt->required();
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    };
    auto* simulate = app.add_subcommand("simulate", "draw return vectors from the model");
    add_common(simulate, true);
    simulate->add_option("--n-samples", n_samples, "number of samples (overrides simulate.n_samples)");
    auto* optimize = app.add_subcommand("optimize", "run one optimiser");
    add_common(optimize, true);
    optimize->add_option("--method", method_name, "smd, psgd or mcmd")
        ->check(CLI::IsMember({"smd", "psgd", "mcmd"}));
    optimize->add_option("--batch-size", batch_size, "mini-batch size for mcmd")->check(CLI::PositiveNumber);
    auto* frontier = app.add_subcommand("frontier", "penalty sweep and Sharpe selection");
    add_common(frontier, true);
    auto* calibrate = app.add_subcommand("calibrate", "estimate a model from CSV series");
    add_common(calibrate, false);
    calibrate->add_option("--rates", calib_in.rates, "short-rate CSV (date,close)");
    calibrate->add_option("--asset", calib_in.assets, "asset CSV as ID=PATH (repeatable)");
    calibrate->add_flag("--rates-in-percent", calib_in.percent, "rate CSV holds percentages");
    calibrate->add_option("--dt", calib_in.dt, "sampling interval in years")->check(CLI::PositiveNumber);
    calibrate->add_option("--bootstrap", calib_in.bootstrap, "bootstrap replications for the CIR errors");
    auto* compare = app.add_subcommand("compare", "SMD vs PSGD vs MC-MD under matched seeds");
    add_common(compare, true);
    compare->add_option("--batch-size", batch_size, "mini-batch size for mcmd")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return ConfigInvalid;
    }

    try {
        Context ctx;
        ctx.threads = threads;
        ctx.out = &out;
        ctx.err = &err;
        json doc = json::object();
        fs::path base_dir = ".";
        if (!config_path.empty()) {
            doc = read_json_file(config_path);
            base_dir = fs::path(config_path).parent_path();
            if (base_dir.empty()) base_dir = ".";
        }
        if (seed && doc.is_object()) doc["seed"] = *seed;
        if (n_samples && doc.is_object()) doc["simulate"]["n_samples"] = *n_samples;
        if (batch_size && *compare && doc.is_object()) doc["compare"]["batch_size"] = *batch_size;
        ctx.cfg = parse_config(doc, base_dir);
        if (!out_dir.empty()) ctx.cfg.output_dir = out_dir;
        fs::create_directories(ctx.cfg.output_dir);

        if (*simulate) return cmd_simulate(ctx);
        if (*optimize) {
            const Method method = method_from_string(method_name);
            std::size_t batch = 1;
            if (method == Method::Mcmd) batch = batch_size.value_or(ctx.cfg.batch_size);
            return cmd_optimize(ctx, method, batch);
        }
        if (*frontier) return cmd_frontier(ctx);
        if (*calibrate) return cmd_calibrate(ctx, calib_in, find_field(doc, "calibrate"), base_dir);
        if (*compare) return cmd_compare(ctx);
        return Internal;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return ConfigInvalid;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return Internal;
    }
}

} // namespace cvarsmd

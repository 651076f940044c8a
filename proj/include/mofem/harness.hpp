#pragma once

// Drivers behind the command-line tool: convergence ladders, single solves,
// DIB simulations, benchmarks and matrix dumps. Each driver takes a RunConfig
// and writes its artifacts under config.output.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mofem/discretization.hpp"
#include "mofem/errors.hpp"
#include "mofem/geometry.hpp"
#include "mofem/io.hpp"
#include "mofem/models.hpp"
#include "mofem/solvers.hpp"
#include "mofem/sylvester.hpp"
#include "mofem/timestepping.hpp"

#ifndef MOFEM_BUILD_ID
#define MOFEM_BUILD_ID "unknown"
#endif

namespace mofem {

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

inline const char* build_id() { return MOFEM_BUILD_ID; }

struct RunConfig {
    std::string command;
    std::string problem = "poisson_square";
    std::string domain;          // empty: the problem's own domain
    std::string bc;              // empty: the problem's own boundary condition
    int k = 1;
    int n = 24;
    int nx = 0, ny = 0;          // 0: use n
    bool lumped = false;
    std::optional<double> gamma; // empty: the problem's reaction coefficient

    std::string solver = "auto";   // auto | reduced | reduced-closed | mo-pcg | direct
    std::string precond = "auto";  // auto | identity | square | xnormal | parabolic
    std::string stop = "auto";     // auto | residual | increment | parabolic
    double tol = 1e-10;
    double increment_fraction = 0.05;
    int max_iter = 2000;

    std::vector<int> ladder;       // empty: 24, 48, 96, 192 (elliptic) or 48, 96 (heat)
    std::string error_norm = "nodal";  // nodal | quadrature
    bool allow_large = false;

    double tau = 0.0;              // 0: derived (tau0 ladder, or 5e-3 / rho for DIB)
    double tau0 = 0.01;
    double t_final = 0.0;          // 0: problem default
    long steps = 0;                // DIB: explicit step count

    std::string preset = "spots_worms";
    double rho = 400.0;
    double d_eta = 1.0;
    std::optional<double> alpha, gamma_k, A1, A2, B, C, D, k2, k3, d_theta;
    double eta_e = 0.0, theta_e = 0.5, amplitude = 1e-4;
    std::uint64_t seed = 20240101;
    long snapshot_every = 0;
    double steady_eps = 1e-8;
    bool stop_at_steady = false;
    bool long_run = false;
    bool cylinder = false;

    std::vector<int> bench_degrees{1, 2, 3, 4};

    std::string output = "out";

    bool is_dib() const { return command == "simulate-dib"; }

    std::pair<int, int> grid() const
    {
        if (is_dib()) return {nx > 0 ? nx : 100, ny > 0 ? ny : 50};
        return {nx > 0 ? nx : n, ny > 0 ? ny : n};
    }

    ManufacturedProblem manufactured() const { return manufactured_problem(problem); }

    DomainSpec domain_spec() const
    {
        if (!domain.empty()) return domain_from_string(domain);
        if (is_dib()) return cap_domain();
        return manufactured().domain;
    }

    BCKind boundary() const
    {
        if (!bc.empty()) return bc_from_string(bc);
        if (is_dib()) return BCKind::Neumann;
        return manufactured().bc;
    }

    std::vector<int> mesh_ladder(bool time_dependent) const
    {
        if (!ladder.empty()) return ladder;
        if (time_dependent) return {48, 96};
        return {24, 48, 96, 192};
    }

    DiscretizationConfig discretization(int Nx, int Ny) const
    {
        return {domain_spec(), k, Nx, Ny, boundary(), lumped};
    }

    void validate() const
    {
        auto one_of = [](const std::string& v, std::initializer_list<const char*> opts, const char* key) {
            for (const char* o : opts)
                if (v == o) return;
            std::string msg = std::string("invalid ") + key + " '" + v + "' (expected";
            for (const char* o : opts) msg += std::string(" ") + o;
            throw ConfigError(msg + ")");
        };
        if (!is_dib() && command != "bench") {
            const auto& names = manufactured_problem_names();
            if (std::find(names.begin(), names.end(), problem) == names.end())
                throw ConfigError("unknown problem '" + problem + "'");
        }
        try {
            (void)domain_spec();
            (void)boundary();
            if (is_dib()) (void)dib_presets(preset);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        if (k < 1 || k > 4) throw ConfigError("k must be 1..4");
        if (lumped && k != 1) throw ConfigError("lumped = true requires k = 1");
        one_of(solver, {"auto", "reduced", "reduced-closed", "mo-pcg", "direct"}, "solver");
        one_of(precond, {"auto", "identity", "square", "xnormal", "parabolic"}, "precond");
        one_of(stop, {"auto", "residual", "increment", "parabolic"}, "stop");
        one_of(error_norm, {"nodal", "quadrature"}, "error-norm");
        if (!(tol > 0.0) || !std::isfinite(tol)) throw ConfigError("tol must be positive");
        if (!(increment_fraction > 0.0)) throw ConfigError("increment-fraction must be positive");
        if (max_iter < 1) throw ConfigError("max-iter must be at least 1");
        const int cap = allow_large ? 4096 : (is_dib() ? 1024 : 192);
        auto check_n = [&](int v, const char* key) {
            if (v < 2) throw ConfigError(std::string(key) + " must be at least 2");
            if (v > cap) throw ConfigError(std::string(key) + " exceeds the desk-scale limit (set allow-large = true)");
        };
        check_n(n, "n");
        if (nx) check_n(nx, "nx");
        if (ny) check_n(ny, "ny");
        for (int v : ladder) check_n(v, "ladder entry");
        for (int v : bench_degrees)
            if (v < 1 || v > 4) throw ConfigError("bench degrees must be 1..4");
        if (gamma && (*gamma < 0.0 || !std::isfinite(*gamma))) throw ConfigError("gamma must be non-negative");
        if (tau < 0.0 || !std::isfinite(tau)) throw ConfigError("tau must be non-negative");
        if (!(tau0 > 0.0)) throw ConfigError("tau0 must be positive");
        if (t_final < 0.0) throw ConfigError("t-final must be non-negative");
        if (steps < 0) throw ConfigError("steps must be non-negative");
        if (!(rho > 0.0)) throw ConfigError("rho must be positive");
        if (!(d_eta > 0.0)) throw ConfigError("d-eta must be positive");
        if (amplitude < 0.0) throw ConfigError("amplitude must be non-negative");
        if (snapshot_every < 0) throw ConfigError("snapshot-every must be non-negative");
        if (!(steady_eps > 0.0)) throw ConfigError("steady-eps must be positive");
        if (solver == "reduced-closed") {
            const auto d = domain_spec();
            const auto [gx, gy] = grid();
            if (d.kind != DomainKind::Square || boundary() != BCKind::Dirichlet || k != 1 || lumped || gx != gy)
                throw ConfigError("reduced-closed needs the square, Dirichlet, k = 1, consistent mass and nx = ny");
        }
        if (is_dib()) {
            if (boundary() != BCKind::Neumann) throw ConfigError("the DIB model uses zero-flux boundaries");
            try {
                dib_params().validate();
            } catch (const Error& e) {
                throw ConfigError(e.what());
            }
        }
        if (output.empty()) throw ConfigError("output directory must not be empty");
    }

    DIBParams dib_params() const
    {
        DIBParams p = dib_presets(preset);
        auto set = [](double& dst, const std::optional<double>& v) {
            if (v) dst = *v;
        };
        set(p.alpha, alpha);
        set(p.gamma_k, gamma_k);
        set(p.A1, A1);
        set(p.A2, A2);
        set(p.B, B);
        set(p.C, C);
        set(p.D, D);
        set(p.k2, k2);
        set(p.k3, k3);
        set(p.d_theta, d_theta);
        p.rho = rho;
        return p;
    }

    io::json to_json() const
    {
        io::json j;
        auto opt = [](const std::optional<double>& v) { return v ? io::json(*v) : io::json(nullptr); };
        j["command"] = command;
        j["problem"] = problem;
        j["domain"] = domain;
        j["bc"] = bc;
        j["k"] = k;
        j["n"] = n;
        j["nx"] = nx;
        j["ny"] = ny;
        j["lumped"] = lumped;
        j["gamma"] = opt(gamma);
        j["solver"] = solver;
        j["precond"] = precond;
        j["stop"] = stop;
        j["tol"] = tol;
        j["increment_fraction"] = increment_fraction;
        j["max_iter"] = max_iter;
        j["ladder"] = ladder;
        j["error_norm"] = error_norm;
        j["allow_large"] = allow_large;
        j["tau"] = tau;
        j["tau0"] = tau0;
        j["t_final"] = t_final;
        j["steps"] = steps;
        j["preset"] = preset;
        j["rho"] = rho;
        j["d_eta"] = d_eta;
        j["alpha"] = opt(alpha);
        j["gamma_k"] = opt(gamma_k);
        j["A1"] = opt(A1);
        j["A2"] = opt(A2);
        j["B"] = opt(B);
        j["C"] = opt(C);
        j["D"] = opt(D);
        j["k2"] = opt(k2);
        j["k3"] = opt(k3);
        j["d_theta"] = opt(d_theta);
        j["eta_e"] = eta_e;
        j["theta_e"] = theta_e;
        j["amplitude"] = amplitude;
        j["seed"] = seed;
        j["snapshot_every"] = snapshot_every;
        j["steady_eps"] = steady_eps;
        j["stop_at_steady"] = stop_at_steady;
        j["long_run"] = long_run;
        j["cylinder"] = cylinder;
        j["bench_degrees"] = bench_degrees;
        j["output"] = output;
        return j;
    }
};

/// Metadata block shared by every command's JSON output.
inline io::json run_metadata(const RunConfig& cfg, int qx, int qy, const std::string& solver,
                             const std::string& stopping_rule)
{
    io::json m;
    m["preset"] = cfg.is_dib() ? cfg.preset : cfg.problem;
    const double rho = cfg.is_dib() ? cfg.rho : 1.0;
    m["effective_domain_size"] = effective_domain_size(cfg.domain_spec(), rho);
    m["qx"] = qx;
    m["qy"] = qy;
    m["solver"] = solver;
    m["stopping_rule"] = stopping_rule;
    m["build_id"] = build_id();
    m["config"] = cfg.to_json();
    return m;
}

inline io::json report_json(const SolveReport& r)
{
    io::json j;
    j["method"] = r.method;
    j["iterations"] = r.iterations;
    j["stop_reason"] = to_string(r.stop_reason);
    j["wall_time"] = r.wall_time;
    j["residual_history"] = r.residual_history;
    return j;
}

namespace detail {

inline Field2D at_time(const Field2DT& f, double t)
{
    return [f, t](double x, double y) { return f(x, y, t); };
}

inline PreconditionerKind elliptic_precond(const RunConfig& cfg, const Discretization& d)
{
    if (cfg.precond == "identity") return PreconditionerKind::Identity;
    if (cfg.precond == "square") return PreconditionerKind::EllipticSquare;
    if (cfg.precond == "xnormal") return PreconditionerKind::EllipticXNormal;
    if (cfg.precond == "parabolic") throw ConfigError("precond = parabolic applies to time-dependent problems only");
    return d.domain().kind == DomainKind::Square && !d.lumped() ? PreconditionerKind::EllipticSquare
                                                                 : PreconditionerKind::EllipticXNormal;
}

inline std::string resolve_solver(const RunConfig& cfg, const SylvesterOperator& op)
{
    if (cfg.solver != "auto") return cfg.solver;
    return op.size() == 2 ? "reduced" : "mo-pcg";
}

inline InnerSolverConfig inner_config(const RunConfig& cfg, bool lumped)
{
    InnerSolverConfig in;
    in.max_iter = cfg.max_iter;
    if (cfg.solver == "direct") {
        in.method = InnerMethod::Direct;
        return in;
    }
    if (cfg.solver == "reduced" || cfg.solver == "reduced-closed")
        throw ConfigError("time stepping supports solver = mo-pcg or direct");
    if (cfg.precond == "identity") in.precond = PreconditionerKind::Identity;
    else if (cfg.precond == "parabolic")
        in.precond = lumped ? PreconditionerKind::ParabolicLumped : PreconditionerKind::Parabolic;
    else if (cfg.precond != "auto")
        throw ConfigError("precond = " + cfg.precond + " is an elliptic preconditioner");
    if (cfg.stop == "residual") in.stop = StoppingRule::relative_residual(cfg.tol);
    else if (cfg.stop == "increment") throw ConfigError("stop = increment is not available for time stepping");
    return in;
}

inline double sample_variance(const Matrix& U)
{
    const double mean = U.mean();
    return (U.array() - mean).square().mean();
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elliptic and parabolic runs

struct EllipticResult {
    SolveReport report;
    std::string solver;
    std::string precond = "none";
    std::string stopping_rule = "none";
    double gamma = 0.0;
    double error_nodal = nan_value;
    double error_quadrature = nan_value;
};

inline EllipticResult run_elliptic(const RunConfig& cfg, const ManufacturedProblem& p, const Discretization& d)
{
    if (p.time_dependent) throw ConfigError("problem '" + p.name + "' is time dependent");
    EllipticResult res;
    res.gamma = cfg.gamma.value_or(p.gamma);
    const DiscreteSystem sys = d.elliptic(res.gamma);
    const Matrix rhs = sys.rhs(d.sample_full(detail::at_time(p.source, 0.0)));
    res.solver = detail::resolve_solver(cfg, sys.op);

    if (res.solver == "reduced") {
        res.report = solve_reduced(sys.op, rhs);
    } else if (res.solver == "reduced-closed") {
        res.report = solve_reduced_closed_form(res.gamma, d.sample(detail::at_time(p.source, 0.0)), d.config().nx);
    } else if (res.solver == "direct") {
        res.report = solve_direct(sys.op, rhs);
    } else {
        const auto kind = detail::elliptic_precond(cfg, d);
        PreconditionerParams pp;
        pp.gamma = res.gamma;
        pp.lumped = d.lumped();
        const Preconditioner P = make_preconditioner(kind, d.x(), d.y(), pp);
        res.precond = to_string(kind);
        StoppingRule rule = StoppingRule::relative_residual(cfg.tol);
        if (cfg.stop == "parabolic") {
            rule = StoppingRule::parabolic(cfg.tau > 0.0 ? cfg.tau : cfg.tol);
        } else if (cfg.stop == "increment") {
            // Threshold: a fraction of the discretization error of the exact discrete solution.
            const Matrix ref = sys.op.size() == 2 ? solve_reduced(sys.op, rhs).solution : solve_direct(sys.op, rhs).solution;
            const double err_v = (ref - d.sample(detail::at_time(p.exact, 0.0))).norm();
            rule = StoppingRule::increment(cfg.increment_fraction * err_v);
        }
        res.report = mo_pcg(sys.op, rhs, P, rule, Matrix(), cfg.max_iter);
        res.stopping_rule = rule.describe();
        if (!res.report.converged())
            throw SolverError("mo-pcg reached max-iter = " + std::to_string(cfg.max_iter) + " without converging");
    }
    const Field2D exact = detail::at_time(p.exact, 0.0);
    res.error_nodal = d.l2_error_nodal(res.report.solution, exact);
    res.error_quadrature = d.l2_error_quadrature(res.report.solution, exact);
    return res;
}

struct HeatResult {
    HeatTrajectory trajectory;
    double tau = 0.0;
    std::string solver;
    std::string stopping_rule;
    long total_iterations = 0;
    int max_iterations = 0;
    double wall_time = 0.0;
    double error_nodal = nan_value;
    double error_quadrature = nan_value;
};

inline HeatResult run_heat(const RunConfig& cfg, const ManufacturedProblem& p, const Discretization& d, double tau)
{
    if (!p.time_dependent) throw ConfigError("problem '" + p.name + "' is not time dependent");
    const auto t0 = std::chrono::steady_clock::now();
    HeatResult res;
    res.tau = tau;
    const InnerSolverConfig inner = detail::inner_config(cfg, d.lumped());
    res.solver = inner.method == InnerMethod::Direct ? "direct" : "mo-pcg";
    res.stopping_rule = inner.method == InnerMethod::Direct ? "direct"
                                                             : inner.stop.value_or(StoppingRule::parabolic(tau)).describe();
    const TimeGrid grid(tau, cfg.t_final > 0.0 ? cfg.t_final : p.t_final);
    const Field2DT src = p.source;
    const SourceFn source = [src](double, double x, double y, double t) { return src(x, y, t); };
    res.trajectory = imex_euler_heat(d, p.d_u, source, d.sample(detail::at_time(p.exact, 0.0)), grid, inner);
    for (int it : res.trajectory.iterations) {
        res.total_iterations += it;
        res.max_iterations = std::max(res.max_iterations, it);
    }
    const Field2D exact = detail::at_time(p.exact, res.trajectory.final_time);
    res.error_nodal = d.l2_error_nodal(res.trajectory.final_state, exact);
    res.error_quadrature = d.l2_error_quadrature(res.trajectory.final_state, exact);
    res.wall_time = detail::seconds_since(t0);
    return res;
}

// ---------------------------------------------------------------------------
// Convergence ladders

struct ConvergenceRow {
    int N = 0;
    double tau = nan_value;
    int qx = 0, qy = 0;
    double error = nan_value;
    double error_nodal = nan_value;
    double error_quadrature = nan_value;
    double order = nan_value;
    double order_nodal = nan_value;
    double order_quadrature = nan_value;
    long iterations = 0;
    int max_step_iterations = 0;
    double wall_time = 0.0;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
};

struct ConvergenceTable {
    std::string problem;
    std::string solver;
    std::string norm;
    int k = 1;
    bool lumped = false;
    std::vector<ConvergenceRow> rows;

    /// Observed orders between consecutive successful rows.
    std::vector<double> orders() const
    {
        std::vector<double> o;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (std::isfinite(rows[i].order)) o.push_back(rows[i].order);
        return o;
    }

    void write_csv(const std::filesystem::path& path) const
    {
        io::CsvWriter w(path, {"N", "tau", "qx", "qy", "l2_error", "l2_error_nodal", "l2_error_quadrature", "order",
                               "order_nodal", "order_quadrature", "iterations", "max_step_iterations", "wall_time",
                               "status"});
        for (const auto& r : rows)
            w.row({std::to_string(r.N), io::format_double(r.tau), std::to_string(r.qx), std::to_string(r.qy),
                   io::format_double(r.error), io::format_double(r.error_nodal), io::format_double(r.error_quadrature),
                   io::format_double(r.order), io::format_double(r.order_nodal), io::format_double(r.order_quadrature),
                   std::to_string(r.iterations), std::to_string(r.max_step_iterations), io::format_double(r.wall_time),
                   r.status});
    }

    io::json to_json() const
    {
        auto num = [](double v) { return std::isfinite(v) ? io::json(v) : io::json(nullptr); };
        io::json j;
        j["problem"] = problem;
        j["solver"] = solver;
        j["norm"] = norm;
        j["k"] = k;
        j["lumped"] = lumped;
        j["rows"] = io::json::array();
        for (const auto& r : rows) {
            io::json e;
            e["N"] = r.N;
            e["tau"] = num(r.tau);
            e["qx"] = r.qx;
            e["qy"] = r.qy;
            e["l2_error"] = num(r.error);
            e["l2_error_nodal"] = num(r.error_nodal);
            e["l2_error_quadrature"] = num(r.error_quadrature);
            e["order"] = num(r.order);
            e["order_nodal"] = num(r.order_nodal);
            e["order_quadrature"] = num(r.order_quadrature);
            e["iterations"] = r.iterations;
            e["max_step_iterations"] = r.max_step_iterations;
            e["wall_time"] = r.wall_time;
            e["status"] = r.status;
            j["rows"].push_back(e);
        }
        return j;
    }
};

namespace detail {

inline double observed_order(double e0, double e1, int n0, int n1)
{
    if (!(e0 > 0.0) || !(e1 > 0.0) || !std::isfinite(e0) || !std::isfinite(e1)) return nan_value;
    return std::log(e0 / e1) / std::log(static_cast<double>(n1) / n0);
}

} // namespace detail

/// Runs the mesh ladder without writing files. Time-dependent problems couple
/// the step to the mesh: tau_i = tau0 * 2^(-(k+1)(i-1)) along the ladder, or a
/// fixed tau when one is configured.
inline ConvergenceTable run_convergence(const RunConfig& cfg)
{
    const ManufacturedProblem p = cfg.manufactured();
    ConvergenceTable t;
    t.problem = p.name;
    t.norm = cfg.error_norm;
    t.k = cfg.k;
    t.lumped = cfg.lumped;
    t.solver = cfg.solver;
    const auto ladder = cfg.mesh_ladder(p.time_dependent);
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        ConvergenceRow row;
        row.N = ladder[i];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Discretization d(cfg.discretization(row.N, row.N));
            row.qx = d.qx();
            row.qy = d.qy();
            if (p.time_dependent) {
                row.tau = cfg.tau > 0.0 ? cfg.tau : cfg.tau0 * std::pow(2.0, -static_cast<double>(cfg.k + 1) * i);
                const HeatResult h = run_heat(cfg, p, d, row.tau);
                row.error_nodal = h.error_nodal;
                row.error_quadrature = h.error_quadrature;
                row.iterations = h.total_iterations;
                row.max_step_iterations = h.max_iterations;
                t.solver = h.solver;
            } else {
                const EllipticResult e = run_elliptic(cfg, p, d);
                row.error_nodal = e.error_nodal;
                row.error_quadrature = e.error_quadrature;
                row.iterations = e.report.iterations;
                row.max_step_iterations = e.report.iterations;
                t.solver = e.solver;
            }
            row.error = cfg.error_norm == "quadrature" ? row.error_quadrature : row.error_nodal;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
        }
        row.wall_time = detail::seconds_since(t0);
        if (!t.rows.empty() && t.rows.back().ok() && row.ok()) {
            const auto& prev = t.rows.back();
            row.order = detail::observed_order(prev.error, row.error, prev.N, row.N);
            row.order_nodal = detail::observed_order(prev.error_nodal, row.error_nodal, prev.N, row.N);
            row.order_quadrature = detail::observed_order(prev.error_quadrature, row.error_quadrature, prev.N, row.N);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline ConvergenceTable cmd_convergence(const RunConfig& cfg)
{
    cfg.validate();
    ConvergenceTable t = run_convergence(cfg);
    const std::filesystem::path out(cfg.output);
    t.write_csv(out / "convergence.csv");
    const int last = t.rows.empty() ? 0 : t.rows.back().N;
    io::json j;
    j["metadata"] = run_metadata(cfg, t.rows.empty() ? 0 : t.rows.back().qx, t.rows.empty() ? 0 : t.rows.back().qy,
                                 t.solver, cfg.stop);
    j["metadata"]["finest_N"] = last;
    j["table"] = t.to_json();
    io::write_json(out / "convergence.json", j);
    return t;
}

// ---------------------------------------------------------------------------
// Single solve

struct SolveOutcome {
    Matrix U;
    int qx = 0, qy = 0;
    double error_nodal = nan_value;
    double error_quadrature = nan_value;
    long iterations = 0;
    std::string solver;
    std::string stopping_rule;
};

inline SolveOutcome cmd_solve(const RunConfig& cfg)
{
    cfg.validate();
    const ManufacturedProblem p = cfg.manufactured();
    const auto [Nx, Ny] = cfg.grid();
    const Discretization d(cfg.discretization(Nx, Ny));
    SolveOutcome out;
    out.qx = d.qx();
    out.qy = d.qy();
    io::json report;
    if (p.time_dependent) {
        const double tau = cfg.tau > 0.0 ? cfg.tau : cfg.tau0;
        HeatResult h = run_heat(cfg, p, d, tau);
        out.U = h.trajectory.final_state;
        out.error_nodal = h.error_nodal;
        out.error_quadrature = h.error_quadrature;
        out.iterations = h.total_iterations;
        out.solver = h.solver;
        out.stopping_rule = h.stopping_rule;
        report["method"] = h.solver;
        report["tau"] = tau;
        report["steps"] = h.trajectory.steps;
        report["final_time"] = h.trajectory.final_time;
        report["total_iterations"] = h.total_iterations;
        report["max_step_iterations"] = h.max_iterations;
        report["wall_time"] = h.wall_time;
    } else {
        EllipticResult e = run_elliptic(cfg, p, d);
        out.U = e.report.solution;
        out.error_nodal = e.error_nodal;
        out.error_quadrature = e.error_quadrature;
        out.iterations = e.report.iterations;
        out.solver = e.solver;
        out.stopping_rule = e.stopping_rule;
        report = report_json(e.report);
        report["preconditioner"] = e.precond;
        report["gamma"] = e.gamma;
    }
    report["l2_error_nodal"] = out.error_nodal;
    report["l2_error_quadrature"] = out.error_quadrature;

    const std::filesystem::path dir(cfg.output);
    io::write_matrix_csv(dir / "U.csv", out.U);
    {
        io::CsvWriter w(dir / "coordinates.csv", {"row", "col", "x_ref", "y", "x"});
        for (int j = 0; j < d.qy(); ++j) {
            const double y = d.y_nodes()[j];
            const double L = d.domain().L(y);
            for (int i = 0; i < d.qx(); ++i)
                w.row({std::to_string(j), std::to_string(i), io::format_double(d.x_nodes()[i]), io::format_double(y),
                       io::format_double(d.x_nodes()[i] * L)});
        }
    }
    io::json j;
    j["metadata"] = run_metadata(cfg, out.qx, out.qy, out.solver, out.stopping_rule);
    j["report"] = report;
    io::write_json(dir / "report.json", j);
    return out;
}

// ---------------------------------------------------------------------------
// DIB simulation

struct DibSummary {
    long steps = 0;
    long steady_step = -1;
    double tau = 0.0;
    double eta_variance_initial = 0.0;
    double eta_variance_final = 0.0;
    double max_abs_eta = 0.0;
    double max_abs_theta = 0.0;
    std::vector<std::string> notes;
    DIBLinearAnalysis analysis;
    RdsTrajectory trajectory;
};

/// Linear-stability and resolution notes for a DIB run.
inline std::vector<std::string> dib_notes(const RunConfig& cfg, const DIBParams& p, const DIBLinearAnalysis& a)
{
    std::vector<std::string> notes;
    char buf[512];
    if (!a.converged) {
        notes.emplace_back("no homogeneous steady state found near the initial state");
        return notes;
    }
    if (std::abs(a.eta - cfg.eta_e) > 1e-6 || std::abs(a.theta - cfg.theta_e) > 1e-6) {
        std::snprintf(buf, sizeof buf,
                      "initial state (%.6g, %.6g) is not a kinetic equilibrium; nearest homogeneous steady state is "
                      "(%.6g, %.6g)",
                      cfg.eta_e, cfg.theta_e, a.eta, a.theta);
        notes.emplace_back(buf);
    }
    if (!a.turing_unstable()) {
        std::snprintf(buf, sizeof buf,
                      "homogeneous steady state is linearly stable at every wavenumber (max growth rate %.4g); "
                      "perturbations decay and no Turing pattern is expected",
                      a.max_growth * p.rho);
        notes.emplace_back(buf);
        return notes;
    }
    const auto [Nx, Ny] = cfg.grid();
    const DomainSpec dom = cfg.domain_spec();
    double Lmax = 0.0;
    for (int i = 0; i <= 200; ++i) Lmax = std::max(Lmax, dom.L(i / 200.0));
    const double h = std::sqrt(p.rho) * std::max(Lmax / Nx, 1.0 / Ny);
    const double per_wave = a.wavelength / h;
    std::snprintf(buf, sizeof buf, "Turing unstable: fastest wavelength %.4g (rescaled units), %.3g mesh cells per wavelength",
                  a.wavelength, per_wave);
    notes.emplace_back(buf);
    if (per_wave < 8.0)
        notes.emplace_back("mesh is below 8 cells per wavelength: patterns may be phantom patterns of the discretization");
    return notes;
}

inline DibSummary cmd_simulate_dib(const RunConfig& cfg_in)
{
    RunConfig cfg = cfg_in;
    cfg.command = "simulate-dib";
    cfg.validate();
    const DIBParams params = cfg.dib_params();
    const auto [Nx, Ny] = cfg.grid();
    const Discretization d(cfg.discretization(Nx, Ny));
    const std::filesystem::path dir(cfg.output);

    DibSummary s;
    s.tau = cfg.tau > 0.0 ? cfg.tau : 5e-3 / cfg.rho;
    long steps = cfg.steps;
    if (steps == 0) {
        if (cfg.t_final > 0.0) steps = TimeGrid(s.tau, cfg.t_final).steps();
        else if (cfg.long_run) steps = TimeGrid(s.tau, 300.0 / cfg.rho).steps();
        else steps = 2000;
    }
    const TimeGrid grid(s.tau, steps * s.tau);
    s.analysis = dib_linear_analysis(params, cfg.eta_e, cfg.theta_e);
    s.notes = dib_notes(cfg, params, s.analysis);

    InitialData init;
    init.eta_e = cfg.eta_e;
    init.theta_e = cfg.theta_e;
    init.amplitude = cfg.amplitude;
    init.seed = cfg.seed;
    auto [U0, V0] = initial_fields(d.qy(), d.qx(), init);
    s.eta_variance_initial = detail::sample_variance(U0);

    const KineticsFn kin = [params](const Matrix& U, const Matrix& V, Matrix& F, Matrix& G) {
        dib_kinetics(U, V, params, F, G);
    };
    const InnerSolverConfig inner = detail::inner_config(cfg, d.lumped());
    const std::string stop_desc =
        inner.method == InnerMethod::Direct ? "direct" : inner.stop.value_or(StoppingRule::parabolic(s.tau)).describe();

    io::CsvWriter metrics(dir / "metrics.csv",
                          {"step", "time", "increment_u", "increment_v", "pcg_iters_u", "pcg_iters_v"});
    Matrix last_eta = U0;
    long last_step = 0;
    char name[64];
    RdsOptions opt;
    opt.snapshot_every = cfg.snapshot_every;
    opt.steady_eps = cfg.steady_eps;
    opt.stop_at_steady = cfg.stop_at_steady;
    opt.on_step = [&](long n, double t, double du, double dv, int iu, int iv) {
        metrics.row({std::to_string(n), io::format_double(t), io::format_double(du), io::format_double(dv),
                     std::to_string(iu), std::to_string(iv)});
    };
    opt.snapshot = [&](long n, double, const Matrix& U, const Matrix&) {
        std::snprintf(name, sizeof name, "eta_%06ld.pgm", n);
        io::write_pgm16(dir / "snapshots" / name, U);
        last_eta = U;
        last_step = n;
    };

    const double sqrt_rho = std::sqrt(cfg.rho);
    io::json meta = run_metadata(cfg, d.qx(), d.qy(), inner.method == InnerMethod::Direct ? "direct" : "mo-pcg", stop_desc);
    meta["tau"] = s.tau;
    meta["steps_requested"] = steps;
    meta["kinetics"] = {{"alpha", params.alpha}, {"gamma_k", params.gamma_k}, {"A1", params.A1}, {"A2", params.A2},
                        {"B", params.B},         {"C", params.C},             {"D", params.D},   {"k2", params.k2},
                        {"k3", params.k3},       {"d_theta", params.d_theta}, {"rho", params.rho}};
    meta["linear_analysis"] = {{"converged", s.analysis.converged},
                               {"eta", s.analysis.eta},
                               {"theta", s.analysis.theta},
                               {"growth_at_zero", s.analysis.growth_at_zero},
                               {"max_growth", s.analysis.max_growth},
                               {"k2_star", s.analysis.k2_star},
                               {"wavelength", s.analysis.wavelength}};
    meta["output_coordinate_scale"] = sqrt_rho;

    try {
        s.trajectory = imex_euler_rds(d, cfg.d_eta, params.d_theta, kin, cfg.rho, std::move(U0), std::move(V0), grid,
                                      inner, opt);
    } catch (const BlowUpError& e) {
        metrics.flush();
        std::snprintf(name, sizeof name, "last_good_eta_%06ld.pgm", last_step);
        io::write_pgm16(dir / name, last_eta);
        s.notes.push_back(std::string("blow-up: ") + e.what() + " at step " + std::to_string(e.step()) +
                          "; last good snapshot from step " + std::to_string(last_step));
        meta["notes"] = s.notes;
        meta["status"] = "blow-up";
        io::write_json(dir / "summary.json", meta);
        throw;
    }
    metrics.flush();

    const auto& tr = s.trajectory;
    s.steps = tr.steps;
    s.steady_step = tr.steady_step;
    s.eta_variance_final = detail::sample_variance(tr.U);
    s.max_abs_eta = tr.U.cwiseAbs().maxCoeff();
    s.max_abs_theta = tr.V.cwiseAbs().maxCoeff();
    io::write_pgm16(dir / "eta_final.pgm", tr.U);

    {
        io::CsvWriter w(dir / "nodes.csv", {"row", "col", "x", "y", "eta", "theta"});
        for (int j = 0; j < d.qy(); ++j) {
            const double y = d.y_nodes()[j];
            const double L = d.domain().L(y);
            for (int i = 0; i < d.qx(); ++i)
                w.row({std::to_string(j), std::to_string(i), io::format_double(sqrt_rho * d.x_nodes()[i] * L),
                       io::format_double(sqrt_rho * y), io::format_double(tr.U(j, i)), io::format_double(tr.V(j, i))});
        }
    }
    if (cfg.cylinder) {
        io::CsvWriter w(dir / "cylinder.csv", {"x", "y", "z", "eta"});
        for (int j = 0; j < d.qy(); ++j) {
            const double y = d.y_nodes()[j];
            const double L = d.domain().L(y);
            for (int i = 0; i < d.qx(); ++i) {
                const Eigen::Vector3d c = sqrt_rho * wrap_to_cylinder(Point2(d.x_nodes()[i] * L, y));
                w.row({io::format_double(c.x()), io::format_double(c.y()), io::format_double(c.z()),
                       io::format_double(tr.U(j, i))});
            }
        }
    }

    meta["status"] = "ok";
    meta["steps"] = s.steps;
    meta["steady_step"] = s.steady_step;
    meta["eta_variance_initial"] = s.eta_variance_initial;
    meta["eta_variance_final"] = s.eta_variance_final;
    meta["max_abs_eta"] = s.max_abs_eta;
    meta["max_abs_theta"] = s.max_abs_theta;
    meta["notes"] = s.notes;
    io::write_json(dir / "summary.json", meta);
    return s;
}

// ---------------------------------------------------------------------------
// Benchmarks

struct BenchRow {
    std::string problem;
    int k = 1;
    int N = 0;
    int qx = 0, qy = 0;
    int pcg_iterations = 0;
    double pcg_time = 0.0;
    double direct_time = nan_value;
    long dense_matrices = mo_pcg_dense_working_set;
    long dense_elements = 0;
    long band_nonzeros = 0;
    long kronecker_nonzeros = -1;
    long kronecker_model = 0;
    double pcg_vs_direct = nan_value;
    std::string status = "ok";
};

inline BenchRow bench_one(const RunConfig& cfg, const std::string& problem, int k, int N)
{
    BenchRow r;
    r.problem = problem;
    r.k = k;
    r.N = N;
    try {
        RunConfig c = cfg;
        c.problem = problem;
        c.k = k;
        const ManufacturedProblem p = manufactured_problem(problem);
        if (p.time_dependent) throw ConfigError("bench runs elliptic problems only");
        c.domain.clear();
        c.bc.clear();
        c.lumped = c.lumped && k == 1;
        const Discretization d(c.discretization(N, N));
        r.qx = d.qx();
        r.qy = d.qy();
        const double gamma = c.gamma.value_or(p.gamma);
        const DiscreteSystem sys = d.elliptic(gamma);
        const Matrix rhs = sys.rhs(d.sample_full(detail::at_time(p.source, 0.0)));
        PreconditionerParams pp;
        pp.gamma = gamma;
        pp.lumped = d.lumped();
        const auto t0 = std::chrono::steady_clock::now();
        const Preconditioner P = make_preconditioner(detail::elliptic_precond(c, d), d.x(), d.y(), pp);
        const SolveReport rep = mo_pcg(sys.op, rhs, P, StoppingRule::relative_residual(c.tol), Matrix(), c.max_iter);
        r.pcg_time = detail::seconds_since(t0);
        r.pcg_iterations = rep.iterations;
        r.dense_elements = static_cast<long>(r.dense_matrices) * r.qx * r.qy;
        for (const auto& t : sys.op.terms()) r.band_nonzeros += t.left.nonZeros() + t.right.nonZeros();
        r.kronecker_model = static_cast<long>((2 * k + 1) * (2 * k + 1)) * r.qx * r.qy;
        if (static_cast<double>(r.qx) * r.qy <= kronecker_size_guard) {
            const auto t1 = std::chrono::steady_clock::now();
            const SolveReport dr = solve_direct(sys.op, rhs);
            r.direct_time = detail::seconds_since(t1);
            r.kronecker_nonzeros = to_kronecker(sys.op).nonZeros();
            if (r.direct_time > 0.0) r.pcg_vs_direct = r.pcg_time / r.direct_time;
            (void)dr;
        } else {
            r.status = "direct skipped: above the Kronecker size guard";
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        r.status = std::string("error: ") + e.what();
    }
    return r;
}

inline std::vector<BenchRow> cmd_bench(const RunConfig& cfg_in)
{
    RunConfig cfg = cfg_in;
    if (cfg.command.empty()) cfg.command = "bench";
    cfg.validate();
    std::vector<BenchRow> rows;
    rows.push_back(bench_one(cfg, "reaction_constant", 1, 8));
    const std::vector<int> ladder = cfg.ladder.empty() ? std::vector<int>{24, 48, 96} : cfg.ladder;
    for (int k : cfg.bench_degrees)
        for (int N : ladder) rows.push_back(bench_one(cfg, cfg.problem, k, N));

    const std::filesystem::path dir(cfg.output);
    io::CsvWriter w(dir / "bench.csv", {"problem", "k", "N", "qx", "qy", "pcg_iterations", "pcg_time", "direct_time",
                                        "pcg_vs_direct", "dense_matrices", "dense_elements", "band_nonzeros",
                                        "kronecker_nonzeros", "kronecker_model", "status"});
    for (const auto& r : rows)
        w.row({r.problem, std::to_string(r.k), std::to_string(r.N), std::to_string(r.qx), std::to_string(r.qy),
               std::to_string(r.pcg_iterations), io::format_double(r.pcg_time), io::format_double(r.direct_time),
               io::format_double(r.pcg_vs_direct), std::to_string(r.dense_matrices), std::to_string(r.dense_elements),
               std::to_string(r.band_nonzeros), std::to_string(r.kronecker_nonzeros), std::to_string(r.kronecker_model),
               r.status});
    const int qx = rows.empty() ? 0 : rows.back().qx, qy = rows.empty() ? 0 : rows.back().qy;
    io::json j;
    j["metadata"] = run_metadata(cfg, qx, qy, "mo-pcg vs direct", StoppingRule::relative_residual(cfg.tol).describe());
    j["rows"] = rows.size();
    io::write_json(dir / "bench.json", j);
    return rows;
}

// ---------------------------------------------------------------------------
// Matrix dump

/// Writes every 1D matrix, every operator term factor and (within the size
/// guard) the Kronecker matrix as coordinate triplets. Returns the file count.
inline int cmd_dump_matrices(const RunConfig& cfg)
{
    cfg.validate();
    const ManufacturedProblem p = cfg.manufactured();
    const auto [Nx, Ny] = cfg.grid();
    const Discretization d(cfg.discretization(Nx, Ny));
    const std::filesystem::path dir = std::filesystem::path(cfg.output) / "matrices";
    int files = 0;
    auto dump = [&](const std::string& name, const SparseMatrix& m) {
        io::write_triplets_csv(dir / (name + ".csv"), m);
        ++files;
    };
    for (const auto* s : {&d.x(), &d.y()}) {
        const std::string pre = s == &d.x() ? "x_" : "y_";
        const auto& c = s->consistent;
        dump(pre + "A", c.A);
        dump(pre + "M", c.M);
        dump(pre + "B1", c.B1);
        dump(pre + "B2", c.B2);
        dump(pre + "C1", c.C1);
        dump(pre + "C2", c.C2);
        dump(pre + "M1", c.M1);
        dump(pre + "M2", c.M2);
        dump(pre + "M3", c.M3);
        if (s->lumped) {
            const auto& l = *s->lumped;
            dump(pre + "M0", l.M0);
            dump(pre + "C", l.C);
            dump(pre + "A1", l.A1);
            dump(pre + "A2", l.A2);
            dump(pre + "D1", l.D1);
            dump(pre + "D2", l.D2);
            dump(pre + "D3", l.D3);
        }
    }
    const DiscreteSystem sys = p.time_dependent ? d.parabolic(p.d_u, cfg.tau > 0.0 ? cfg.tau : cfg.tau0)
                                                : d.elliptic(cfg.gamma.value_or(p.gamma));
    io::json terms = io::json::array();
    for (std::size_t i = 0; i < sys.op.terms().size(); ++i) {
        const auto& t = sys.op.terms()[i];
        dump("term" + std::to_string(i) + "_left", t.left);
        dump("term" + std::to_string(i) + "_right", t.right);
        terms.push_back(t.label);
    }
    io::json j;
    j["metadata"] = run_metadata(cfg, d.qx(), d.qy(), "none", "none");
    j["terms"] = terms;
    j["symmetric"] = sys.op.is_symmetric();
    if (static_cast<double>(d.qx()) * d.qy() <= kronecker_size_guard) {
        dump("kronecker", to_kronecker(sys.op));
        j["kronecker"] = true;
    } else {
        j["kronecker"] = false;
    }
    io::write_json(dir / "index.json", j);
    return files;
}

} // namespace mofem

// mofem command-line tool.
//
//   mofem [--config FILE] <command> [options]
//
// Commands: convergence, solve, simulate-dib, bench, dump-matrices.
// Exit status: 0 success, 2 solver failure, 3 configuration error.

#include <cmath>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mofem/mofem.hpp"

namespace {

constexpr int exit_solver = 2;
constexpr int exit_config = 3;

void add_options(CLI::App& app, mofem::RunConfig& c)
{
    app.add_option("--problem", c.problem, "manufactured problem: poisson_square | poisson_cap | heat_cap | reaction_constant");
    app.add_option("--domain", c.domain, "square | cap | jar | custom:<name> (default: the problem's domain)");
    app.add_option("--bc", c.bc, "dirichlet | neumann (default: the problem's)");
    app.add_option("--k", c.k, "polynomial degree 1..4");
    app.add_option("--n", c.n, "subintervals per direction");
    app.add_option("--nx", c.nx, "subintervals in x (overrides --n)");
    app.add_option("--ny", c.ny, "subintervals in y (overrides --n)");
    app.add_option("--lumped", c.lumped, "lumped P1 mass");
    app.add_option_function<double>("--gamma", [&c](const double& v) { c.gamma = v; }, "reaction coefficient");

    app.add_option("--solver", c.solver, "auto | reduced | reduced-closed | mo-pcg | direct");
    app.add_option("--precond", c.precond, "auto | identity | square | xnormal | parabolic");
    app.add_option("--stop", c.stop, "auto | residual | increment | parabolic");
    app.add_option("--tol", c.tol, "relative residual tolerance");
    app.add_option("--increment-fraction", c.increment_fraction, "increment threshold as a fraction of the discretization error");
    app.add_option("--max-iter", c.max_iter, "MO-PCG iteration cap");

    app.add_option("--ladder", c.ladder, "mesh ladder, e.g. 24,48,96")->delimiter(',');
    app.add_option("--error-norm", c.error_norm, "nodal | quadrature");
    app.add_option("--allow-large", c.allow_large, "lift the desk-scale mesh limits");

    app.add_option("--tau", c.tau, "time step (0: derived)");
    app.add_option("--tau0", c.tau0, "first time step of a coupled ladder");
    app.add_option("--t-final", c.t_final, "final time (0: problem default)");
    app.add_option("--steps", c.steps, "DIB step count (0: derived)");

    app.add_option("--preset", c.preset, "DIB preset: spots_worms | holes");
    app.add_option("--rho", c.rho, "DIB rescaling parameter");
    app.add_option("--d-eta", c.d_eta, "diffusion coefficient of eta");
    auto opt = [&app](const char* name, std::optional<double>& dst) {
        app.add_option_function<double>(name, [&dst](const double& v) { dst = v; }, "DIB kinetics override");
    };
    opt("--alpha", c.alpha);
    opt("--gamma-k", c.gamma_k);
    opt("--A1", c.A1);
    opt("--A2", c.A2);
    opt("--B", c.B);
    opt("--C", c.C);
    opt("--D", c.D);
    opt("--k2", c.k2);
    opt("--k3", c.k3);
    opt("--d-theta", c.d_theta);
    app.add_option("--eta-e", c.eta_e, "initial eta level");
    app.add_option("--theta-e", c.theta_e, "initial theta level");
    app.add_option("--amplitude", c.amplitude, "initial noise amplitude");
    app.add_option("--seed", c.seed, "initial noise seed");
    app.add_option("--snapshot-every", c.snapshot_every, "PGM snapshot interval in steps (0: none)");
    app.add_option("--steady-eps", c.steady_eps, "relative increment threshold for steady state");
    app.add_option("--stop-at-steady", c.stop_at_steady, "stop once the steady threshold is met");
    app.add_flag("--long-run", c.long_run, "run the long 300 / rho horizon");
    app.add_option("--cylinder", c.cylinder, "also write 3D cylinder coordinates");

    app.add_option("--bench-degrees", c.bench_degrees, "degrees for bench, e.g. 1,2")->delimiter(',');
    app.add_option("--output,-o", c.output, "output directory");
}

void print_table(const mofem::ConvergenceTable& t)
{
    std::cout << "problem " << t.problem << "  k=" << t.k << (t.lumped ? " (lumped)" : "") << "  solver " << t.solver
              << "  norm " << t.norm << '\n';
    std::cout << "     N          tau        error    order   iters   time[s]\n";
    for (const auto& r : t.rows) {
        char buf[256];
        if (!r.ok()) {
            std::snprintf(buf, sizeof buf, "%6d  %s\n", r.N, r.status.c_str());
        } else {
            std::snprintf(buf, sizeof buf, "%6d  %11.4e  %11.4e  %7.3f  %6ld  %8.3f\n", r.N, r.tau, r.error, r.order,
                          r.iterations, r.wall_time);
        }
        std::cout << buf;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Matrix-oriented finite element solver"};
    app.set_config("--config", "", "flat key = value configuration file");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.fallthrough();
    app.require_subcommand(1);

    mofem::RunConfig cfg;
    add_options(app, cfg);
    auto* conv = app.add_subcommand("convergence", "mesh ladder with observed orders");
    auto* solve = app.add_subcommand("solve", "single elliptic or parabolic solve");
    auto* dib = app.add_subcommand("simulate-dib", "DIB reaction-diffusion simulation");
    auto* bench = app.add_subcommand("bench", "MO-PCG vs. Kronecker direct timings and storage counts");
    auto* dump = app.add_subcommand("dump-matrices", "write 1D matrices, term factors and the Kronecker matrix");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (conv->parsed()) {
            cfg.command = "convergence";
            print_table(mofem::cmd_convergence(cfg));
        } else if (solve->parsed()) {
            cfg.command = "solve";
            const auto r = mofem::cmd_solve(cfg);
            std::cout << "solver " << r.solver << "  q = " << r.qy << " x " << r.qx << "  iterations " << r.iterations
                      << "  L2 error " << r.error_nodal << " (nodal), " << r.error_quadrature << " (quadrature)\n";
        } else if (dib->parsed()) {
            cfg.command = "simulate-dib";
            const auto s = mofem::cmd_simulate_dib(cfg);
            std::cout << "steps " << s.steps << "  tau " << s.tau << "  eta variance " << s.eta_variance_initial << " -> "
                      << s.eta_variance_final << '\n';
            for (const auto& n : s.notes) std::cout << "note: " << n << '\n';
        } else if (bench->parsed()) {
            cfg.command = "bench";
            const auto rows = mofem::cmd_bench(cfg);
            for (const auto& r : rows)
                std::cout << r.problem << " k=" << r.k << " N=" << r.N << " iters " << r.pcg_iterations << " pcg "
                          << r.pcg_time << " s direct " << r.direct_time << " s  kron nnz " << r.kronecker_nonzeros
                          << " / model " << r.kronecker_model << "  " << r.status << '\n';
        } else if (dump->parsed()) {
            cfg.command = "dump-matrices";
            std::cout << mofem::cmd_dump_matrices(cfg) << " files written\n";
        }
    } catch (const mofem::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const mofem::SizeGuardError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const mofem::UnsupportedError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const mofem::GeometryError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const mofem::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return exit_solver;
    }
    return 0;
}

#pragma once

// IMEX-Euler time stepping in matrix form: diffusion implicit, reaction
// explicit, one multiterm Sylvester solve per species and step.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mofem/discretization.hpp"
#include "mofem/errors.hpp"
#include "mofem/solvers.hpp"

namespace mofem {

struct TimeGrid {
    double tau = 0.01;
    double T = 1.0;

    TimeGrid() = default;
    TimeGrid(double tau_, double T_) : tau(tau_), T(T_)
    {
        if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("TimeGrid: tau must be positive");
        if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("TimeGrid: final time must be positive");
    }

    /// N_T = ceil(T / tau), robust to T / tau landing a hair above an integer.
    long steps() const
    {
        const double r = T / tau;
        const double n = std::round(r);
        if (std::abs(r - n) <= 1e-9 * std::max(1.0, n)) return std::max(1L, static_cast<long>(n));
        return std::max(1L, static_cast<long>(std::ceil(r)));
    }
};

enum class InnerMethod { MoPcg, Direct };

struct InnerSolverConfig {
    InnerMethod method = InnerMethod::MoPcg;
    /// Empty means the parabolic preconditioner matching the discretization.
    std::optional<PreconditionerKind> precond;
    /// Empty means the residual rule ||R|| <= tau ||R0||.
    std::optional<StoppingRule> stop;
    int max_iter = 200;
};

/// One species' implicit operator with its preconditioner (or direct factor),
/// built once and reused at every step.
class ImplicitStepper {
public:
    ImplicitStepper(const Discretization& d, double diffusion, double tau, const InnerSolverConfig& cfg)
        : sys_(d.parabolic(diffusion, tau)), cfg_(cfg)
    {
        if (cfg_.method == InnerMethod::Direct) {
            direct_.emplace(sys_.op);
            return;
        }
        const auto kind = cfg_.precond.value_or(d.lumped() ? PreconditionerKind::ParabolicLumped
                                                            : PreconditionerKind::Parabolic);
        PreconditionerParams pp;
        pp.d_u = diffusion;
        pp.tau = tau;
        pp.lumped = d.lumped();
        precond_ = make_preconditioner(kind, d.x(), d.y(), pp);
        stop_ = cfg_.stop.value_or(StoppingRule::parabolic(tau));
    }

    const DiscreteSystem& system() const { return sys_; }

    /// Solves L(U) = rhs warm-started at `guess`; returns the iteration count.
    int solve(const Matrix& rhs, Matrix& U) const
    {
        if (direct_) {
            U = direct_->solve(rhs);
            return 0;
        }
        auto rep = mo_pcg(sys_.op, rhs, precond_, stop_, U, cfg_.max_iter);
        if (!rep.converged()) throw SolverError("inner MO-PCG did not converge");
        U = std::move(rep.solution);
        return rep.iterations;
    }

private:
    DiscreteSystem sys_;
    InnerSolverConfig cfg_;
    Preconditioner precond_;
    StoppingRule stop_;
    std::optional<KroneckerDirectSolver> direct_;
};

/// f(u, x_L, y, t), evaluated nodally.
using SourceFn = std::function<double(double, double, double, double)>;

struct HeatTrajectory {
    Matrix final_state;
    long steps = 0;
    double final_time = 0.0;
    std::vector<int> iterations;
    std::vector<double> increments;
};

using StepObserver = std::function<void(long step, double t, const Matrix& U)>;

inline HeatTrajectory imex_euler_heat(const Discretization& d, double d_u, const SourceFn& source, Matrix U0,
                                      const TimeGrid& grid, const InnerSolverConfig& inner = {},
                                      const StepObserver& observer = {})
{
    if (!(d_u > 0.0)) throw DomainError("imex_euler_heat: d_u must be positive");
    if (U0.rows() != d.qy() || U0.cols() != d.qx()) throw ShapeError("imex_euler_heat: initial state shape mismatch");
    const ImplicitStepper stepper(d, d_u, grid.tau, inner);

    HeatTrajectory tr;
    Matrix U = std::move(U0), F, next;
    const long nt = grid.steps();
    const auto& bx = d.x().basis;
    const auto& by = d.y().basis;
    for (long n = 0; n < nt; ++n) {
        const double t = n * grid.tau;
        // Full node grid, so the source also acts through trimmed boundary nodes.
        F = d.extend(U);
        for (int j = 0; j < F.rows(); ++j) {
            const double y = by.node(j);
            const double L = d.domain().L(y);
            for (int i = 0; i < F.cols(); ++i) F(j, i) += grid.tau * source(F(j, i), bx.node(i) * L, y, t);
        }
        if (!F.allFinite()) throw BlowUpError("imex_euler_heat: non-finite source", n + 1);
        const Matrix rhs = stepper.system().rhs(F);
        next = U;
        int its = 0;
        try {
            its = stepper.solve(rhs, next);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " at step " + std::to_string(n + 1));
        }
        if (!next.allFinite()) throw BlowUpError("imex_euler_heat: non-finite state", n + 1);
        tr.iterations.push_back(its);
        tr.increments.push_back((next - U).norm());
        U.swap(next);
        if (observer) observer(n + 1, (n + 1) * grid.tau, U);
    }
    tr.steps = nt;
    tr.final_time = nt * grid.tau;
    tr.final_state = std::move(U);
    return tr;
}

/// Nodal kinetics (F, G) = (f(U, V), g(U, V)).
using KineticsFn = std::function<void(const Matrix& U, const Matrix& V, Matrix& F, Matrix& G)>;

struct RdsOptions {
    long snapshot_every = 0;      // 0 disables snapshots
    double steady_eps = 1e-8;     // relative increment threshold
    bool stop_at_steady = false;
    std::function<void(long step, double t, const Matrix& U, const Matrix& V)> snapshot;
    /// Called after every step with the increments and inner iteration counts.
    std::function<void(long step, double t, double du, double dv, int iu, int iv)> on_step;
};

struct RdsTrajectory {
    Matrix U, V;
    long steps = 0;
    std::vector<double> increments_u, increments_v;
    std::vector<int> iterations_u, iterations_v;
    long steady_step = -1;  // first step with both relative increments below steady_eps
};

/// u_t = d_u Lap u + rho f(u, v), v_t = d_v Lap v + rho g(u, v).
inline RdsTrajectory imex_euler_rds(const Discretization& d, double d_u, double d_v, const KineticsFn& kinetics,
                                    double rho, Matrix U0, Matrix V0, const TimeGrid& grid,
                                    const InnerSolverConfig& inner = {}, const RdsOptions& opt = {})
{
    if (!(d_u > 0.0) || !(d_v > 0.0)) throw DomainError("imex_euler_rds: diffusion coefficients must be positive");
    if (!(rho > 0.0)) throw DomainError("imex_euler_rds: rho must be positive");
    if (U0.rows() != d.qy() || U0.cols() != d.qx() || V0.rows() != d.qy() || V0.cols() != d.qx())
        throw ShapeError("imex_euler_rds: initial state shape mismatch");
    const ImplicitStepper su(d, d_u, grid.tau, inner);
    const ImplicitStepper sv(d, d_v, grid.tau, inner);

    RdsTrajectory tr;
    Matrix U = std::move(U0), V = std::move(V0), F, G, nu, nv;
    if (opt.snapshot && opt.snapshot_every > 0) opt.snapshot(0, 0.0, U, V);
    const long nt = grid.steps();
    const double tr_scale = grid.tau * rho;
    for (long n = 0; n < nt; ++n) {
        kinetics(U, V, F, G);
        if (!F.allFinite() || !G.allFinite()) throw BlowUpError("imex_euler_rds: non-finite kinetics", n + 1);
        const Matrix ru = su.system().rhs(U + tr_scale * F);
        const Matrix rv = sv.system().rhs(V + tr_scale * G);
        nu = U;
        nv = V;
        int iu = 0, iv = 0;
        try {
            iu = su.solve(ru, nu);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " (species u, step " + std::to_string(n + 1) + ")");
        }
        try {
            iv = sv.solve(rv, nv);
        } catch (const SolverError& e) {
            throw SolverError(std::string(e.what()) + " (species v, step " + std::to_string(n + 1) + ")");
        }
        if (!nu.allFinite() || !nv.allFinite()) throw BlowUpError("imex_euler_rds: non-finite state", n + 1);
        const double du = (nu - U).norm(), dv = (nv - V).norm();
        tr.increments_u.push_back(du);
        tr.increments_v.push_back(dv);
        tr.iterations_u.push_back(iu);
        tr.iterations_v.push_back(iv);
        U.swap(nu);
        V.swap(nv);
        tr.steps = n + 1;
        if (opt.on_step) opt.on_step(n + 1, (n + 1) * grid.tau, du, dv, iu, iv);
        if (opt.snapshot && opt.snapshot_every > 0 && (n + 1) % opt.snapshot_every == 0)
            opt.snapshot(n + 1, (n + 1) * grid.tau, U, V);
        if (tr.steady_step < 0 && du <= opt.steady_eps * U.norm() && dv <= opt.steady_eps * V.norm()) {
            tr.steady_step = n + 1;
            if (opt.stop_at_steady) break;
        }
    }
    tr.U = std::move(U);
    tr.V = std::move(V);
    return tr;
}

} // namespace mofem

#pragma once

// Problem library: manufactured elliptic/parabolic problems and the DIB
// electrodeposition kinetics with their presets and initial data.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "mofem/errors.hpp"
#include "mofem/fem1d.hpp"
#include "mofem/geometry.hpp"

namespace mofem {

// ---------------------------------------------------------------------------
// Manufactured problems

/// Space-time field g(x_L, y, t) on the physical domain.
using Field2DT = std::function<double(double, double, double)>;

struct ManufacturedProblem {
    std::string name;
    DomainSpec domain;
    BCKind bc = BCKind::Dirichlet;
    double gamma = 0.0;  // reaction coefficient in -d_u Lap u + gamma u
    double d_u = 1.0;
    bool time_dependent = false;
    double t_final = 0.0;
    Field2DT exact;
    Field2DT source;
};

namespace detail {

/// u = y(y-1)(x^2 - S^2) with S = 1 - y^2/2 on the cap.
inline double cap_exact(double x, double y)
{
    const double S = 1.0 - 0.5 * y * y;
    return y * (y - 1.0) * (x * x - S * S);
}

/// -Lap of cap_exact.
inline double cap_minus_laplacian(double x, double y)
{
    const double S = 1.0 - 0.5 * y * y;
    const double p = y * y - y;
    const double uxx = 2.0 * p;
    const double uyy = 2.0 * (x * x - S * S) + 2.0 * (2.0 * y - 1.0) * (2.0 * y - y * y * y) + p * (2.0 - 3.0 * y * y);
    return -(uxx + uyy);
}

} // namespace detail

inline ManufacturedProblem manufactured_problem(const std::string& name)
{
    constexpr double pi = std::numbers::pi;
    ManufacturedProblem p;
    p.name = name;
    if (name == "poisson_square") {
        p.domain = square_domain();
        p.exact = [](double x, double y, double) { return std::sin(2 * pi * x) * std::sin(2 * pi * y); };
        p.source = [](double x, double y, double) {
            return 8 * pi * pi * std::sin(2 * pi * x) * std::sin(2 * pi * y);
        };
        return p;
    }
    if (name == "poisson_cap") {
        p.domain = cap_domain();
        p.exact = [](double x, double y, double) { return detail::cap_exact(x, y); };
        p.source = [](double x, double y, double) { return detail::cap_minus_laplacian(x, y); };
        return p;
    }
    if (name == "heat_cap") {
        // u_t - d_u Lap u = f with u = u(x, y, 0) e^t.
        p.domain = cap_domain();
        p.d_u = 0.1;
        p.time_dependent = true;
        p.t_final = 1.0;
        const double du = p.d_u;
        p.exact = [](double x, double y, double t) { return detail::cap_exact(x, y) * std::exp(t); };
        p.source = [du](double x, double y, double t) {
            return std::exp(t) * (detail::cap_exact(x, y) + du * detail::cap_minus_laplacian(x, y));
        };
        return p;
    }
    if (name == "reaction_constant") {
        // -Lap u + gamma u = gamma with zero flux: u == 1 on any domain.
        p.domain = square_domain();
        p.bc = BCKind::Neumann;
        p.gamma = 1.0;
        p.exact = [](double, double, double) { return 1.0; };
        const double g = p.gamma;
        p.source = [g](double, double, double) { return g; };
        return p;
    }
    throw DomainError("unknown manufactured problem '" + name + "'");
}

inline const std::vector<std::string>& manufactured_problem_names()
{
    static const std::vector<std::string> names{"poisson_square", "poisson_cap", "heat_cap", "reaction_constant"};
    return names;
}

// ---------------------------------------------------------------------------
// DIB model

struct DIBParams {
    double alpha = 0.5;
    double gamma_k = 0.2;
    double A1 = 10.0;
    double A2 = 30.0;
    double B = 25.0;
    double C = 7.0;
    double D = 3.2727;
    double k2 = 2.5;
    double k3 = 1.5;
    double d_theta = 20.0;
    double rho = 1.0;

    void validate() const
    {
        const double pos[] = {alpha, gamma_k, A1, A2, B, C, D, k2, k3, d_theta, rho};
        for (double v : pos)
            if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("DIB parameters must be finite and positive");
        if (!(alpha < 1.0)) throw DomainError("DIB alpha must lie in (0, 1)");
        if (!(gamma_k < 1.0)) throw DomainError("DIB gamma_k must lie in (0, 1)");
    }
};

inline DIBParams dib_presets(const std::string& name)
{
    DIBParams p;
    if (name == "spots_worms") return p;
    if (name == "holes") {
        p.A2 = 1.0;
        p.B = 30.0;
        p.C = 3.0;
        return p;
    }
    throw DomainError("unknown DIB preset '" + name + "'");
}

/// f(eta, theta) and g(eta, theta) for scalars.
inline std::pair<double, double> dib_kinetics(double eta, double theta, const DIBParams& p)
{
    const double f = p.A1 * (1.0 - theta) * eta - p.A2 * eta * eta * eta - p.B * (theta - p.alpha);
    const double g = p.C * (1.0 + p.k2 * eta) * (1.0 - theta) * (1.0 - p.gamma_k * (1.0 - theta)) -
                     p.D * theta * (1.0 + p.gamma_k * theta) * (1.0 + p.k3 * eta);
    return {f, g};
}

/// Homogeneous steady state near a starting point and the Turing dispersion
/// relation of the linearization, growth(k2) = max Re eig(J - k2 diag(1, d_theta)),
/// in units where the kinetics carry no rho factor.
struct DIBLinearAnalysis {
    bool converged = false;
    double eta = 0.0, theta = 0.0;
    double growth_at_zero = 0.0;
    double max_growth = 0.0;
    double k2_star = 0.0;
    /// 2 pi / sqrt(k2_star); 0 when the homogeneous state is stable.
    double wavelength = 0.0;
    bool turing_unstable() const { return converged && max_growth > 0.0 && growth_at_zero < 0.0; }
};

inline DIBLinearAnalysis dib_linear_analysis(const DIBParams& p, double eta0, double theta0);

/// Entrywise kinetics on nodal grids.
inline void dib_kinetics(const Eigen::MatrixXd& eta, const Eigen::MatrixXd& theta, const DIBParams& p,
                         Eigen::MatrixXd& f, Eigen::MatrixXd& g)
{
    if (eta.rows() != theta.rows() || eta.cols() != theta.cols()) throw ShapeError("dib_kinetics: shape mismatch");
    f.resize(eta.rows(), eta.cols());
    g.resize(eta.rows(), eta.cols());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        const auto [fv, gv] = dib_kinetics(eta.data()[i], theta.data()[i], p);
        f.data()[i] = fv;
        g.data()[i] = gv;
    }
}

inline DIBLinearAnalysis dib_linear_analysis(const DIBParams& p, double eta0, double theta0)
{
    auto jac = [&](double e, double t) {
        constexpr double h = 1e-7;
        Eigen::Matrix2d J;
        const auto fe1 = dib_kinetics(e + h, t, p), fe0 = dib_kinetics(e - h, t, p);
        const auto ft1 = dib_kinetics(e, t + h, p), ft0 = dib_kinetics(e, t - h, p);
        J << (fe1.first - fe0.first) / (2 * h), (ft1.first - ft0.first) / (2 * h), (fe1.second - fe0.second) / (2 * h),
            (ft1.second - ft0.second) / (2 * h);
        return J;
    };
    DIBLinearAnalysis a;
    Eigen::Vector2d x(eta0, theta0);
    for (int it = 0; it < 100; ++it) {
        const auto [f, g] = dib_kinetics(x[0], x[1], p);
        const Eigen::Vector2d r(f, g);
        if (r.norm() < 1e-12) {
            a.converged = true;
            break;
        }
        const Eigen::Vector2d dx = jac(x[0], x[1]).fullPivLu().solve(-r);
        if (!dx.allFinite()) break;
        x += dx;
    }
    a.eta = x[0];
    a.theta = x[1];
    if (!a.converged) return a;
    const Eigen::Matrix2d J = jac(x[0], x[1]);
    auto growth = [&](double k2) {
        Eigen::Matrix2d K = J;
        K(0, 0) -= k2;
        K(1, 1) -= p.d_theta * k2;
        return Eigen::EigenSolver<Eigen::Matrix2d>(K, false).eigenvalues().real().maxCoeff();
    };
    a.growth_at_zero = growth(0.0);
    a.max_growth = a.growth_at_zero;
    for (int i = 1; i <= 20000; ++i) {
        const double k2 = 50.0 * i / 20000;
        const double g = growth(k2);
        if (g > a.max_growth) {
            a.max_growth = g;
            a.k2_star = k2;
        }
    }
    if (a.turing_unstable() && a.k2_star > 0.0) a.wavelength = 2.0 * std::numbers::pi / std::sqrt(a.k2_star);
    return a;
}

// ---------------------------------------------------------------------------
// Initial data

/// SplitMix64 applied to a counter: value i of stream `seed` is
/// splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15), mapped to [0, 1) with 53 bits.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

struct InitialData {
    double eta_e = 0.0;
    double theta_e = 0.5;
    double amplitude = 1e-4;
    std::uint64_t seed = 20240101;
};

/// Equilibrium plus amplitude * U(0, 1) noise, drawn in column-major order
/// (eta first, then theta from a second stream).
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> initial_fields(int rows, int cols, const InitialData& d)
{
    if (rows <= 0 || cols <= 0) throw DomainError("initial_fields: dimensions must be positive");
    Eigen::MatrixXd eta = Eigen::MatrixXd::Constant(rows, cols, d.eta_e);
    Eigen::MatrixXd theta = Eigen::MatrixXd::Constant(rows, cols, d.theta_e);
    if (d.amplitude != 0.0) {
        SplitMix64 ge(d.seed), gt(d.seed ^ 0xD1B54A32D192ED03ULL);
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta.data()[i] += d.amplitude * ge.uniform();
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta.data()[i] += d.amplitude * gt.uniform();
    }
    return {std::move(eta), std::move(theta)};
}

} // namespace mofem

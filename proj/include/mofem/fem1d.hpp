#pragma once

// One-dimensional Lagrange P_k bases on a unit interval and the banded
// matrices that feed every Kronecker identity: standard stiffness/mass,
// seven profile-weighted matrices, and the lumped P_1 family.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mofem/errors.hpp"
#include "mofem/geometry.hpp"
#include "mofem/quadrature.hpp"

namespace mofem {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

enum class BCKind { Dirichlet, Neumann };

inline const char* to_string(BCKind bc) { return bc == BCKind::Dirichlet ? "dirichlet" : "neumann"; }

inline BCKind bc_from_string(const std::string& s)
{
    if (s == "dirichlet") return BCKind::Dirichlet;
    if (s == "neumann") return BCKind::Neumann;
    throw DomainError("unknown boundary condition '" + s + "'");
}

/// Values and derivatives (w.r.t. the local coordinate t in [0,1]) of the
/// k+1 equispaced Lagrange polynomials at t.
struct LocalShape {
    std::array<double, 5> value{};
    std::array<double, 5> deriv{};
};

inline LocalShape lagrange_shape(int k, double t)
{
    LocalShape s;
    for (int a = 0; a <= k; ++a) {
        const double ta = static_cast<double>(a) / k;
        double v = 1.0;
        double d = 0.0;
        for (int b = 0; b <= k; ++b) {
            if (b == a) continue;
            const double tb = static_cast<double>(b) / k;
            const double inv = 1.0 / (ta - tb);
            // product rule accumulated on the fly
            d = d * (t - tb) * inv + v * inv;
            v *= (t - tb) * inv;
        }
        s.value[a] = v;
        s.deriv[a] = d;
    }
    return s;
}

struct Basis1D {
    int degree = 1;
    int subintervals = 2;
    BCKind bc = BCKind::Dirichlet;
    double origin = 0.0;
    QuadratureRule quadrature;

    int element_count() const { return subintervals / degree; }
    double element_width() const { return static_cast<double>(degree) / subintervals; }
    int dim() const { return bc == BCKind::Dirichlet ? subintervals - 1 : subintervals + 1; }

    double node(int m) const { return origin + static_cast<double>(m) / subintervals; }

    /// Global node index -> retained degree of freedom, or -1 for trimmed boundary nodes.
    int dof_of_node(int m) const
    {
        if (bc == BCKind::Neumann) return m;
        return (m == 0 || m == subintervals) ? -1 : m - 1;
    }

    int node_of_dof(int i) const { return bc == BCKind::Neumann ? i : i + 1; }

    /// Coordinates of the retained nodes.
    Eigen::VectorXd dof_coordinates() const
    {
        Eigen::VectorXd x(dim());
        for (int i = 0; i < dim(); ++i) x[i] = node(node_of_dof(i));
        return x;
    }

    /// Value (and derivative) of the global basis function attached to a dof.
    double value(int dof, double x, bool derivative = false) const
    {
        const int m = node_of_dof(dof);
        const double h = element_width();
        double result = 0.0;
        const int e_first = std::max(0, (m - 1) / degree);
        const int e_last = std::min(element_count() - 1, m / degree);
        for (int e = e_first; e <= e_last; ++e) {
            const int a = m - e * degree;
            if (a < 0 || a > degree) continue;
            const double left = origin + e * h;
            if (x < left - 1e-14 || x > left + h + 1e-14) continue;
            const auto s = lagrange_shape(degree, std::clamp((x - left) / h, 0.0, 1.0));
            // Shared vertices evaluate identically from either side (values only).
            return derivative ? s.deriv[a] / h : s.value[a];
        }
        return result;
    }
};

inline Basis1D build_basis(int k, int N, BCKind bc, double origin = 0.0)
{
    if (k < 1 || k > 4) throw UnsupportedError("build_basis: degree must be in 1..4");
    if (N < 2) throw DomainError("build_basis: need at least two subintervals");
    if (N % k != 0) throw DomainError("build_basis: subinterval count must be divisible by the degree");
    Basis1D b;
    b.degree = k;
    b.subintervals = N;
    b.bc = bc;
    b.origin = origin;
    b.quadrature = gauss_legendre(std::max(k + 3, 5));
    return b;
}

struct Matrix1DSet {
    SparseMatrix A, M;           // stiffness, mass
    SparseMatrix B1, B2;         // stiffness weighted by L and x^2
    SparseMatrix C1, C2;         // psi_i' psi_j weighted by x and L'
    SparseMatrix M1, M2, M3;     // mass weighted by 1/L, L'^2/L, L
};

struct LumpedSet {
    SparseMatrix M0;             // diagonal lumped mass
    SparseMatrix C;              // psi_i' psi_j
    SparseMatrix A1, A2;         // interpolated stiffness weighted by L and x^2
    SparseMatrix D1, D2, D3;     // nodal L, L', x
};

namespace detail {

inline SparseMatrix from_triplets(int n, const Triplets& t)
{
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    m.prune([](Eigen::Index, Eigen::Index, double v) { return v != 0.0; });
    m.makeCompressed();
    return m;
}

/// Runs fn(e, local_a, local_b, dof_a, dof_b) over all retained local pairs.
template <class Fn>
void for_each_element_pair(const Basis1D& b, Fn&& fn)
{
    for (int e = 0; e < b.element_count(); ++e)
        for (int a = 0; a <= b.degree; ++a) {
            const int ia = b.dof_of_node(e * b.degree + a);
            if (ia < 0) continue;
            for (int c = 0; c <= b.degree; ++c) {
                const int ic = b.dof_of_node(e * b.degree + c);
                if (ic < 0) continue;
                fn(e, a, c, ia, ic);
            }
        }
}

inline SparseMatrix diagonal(const Eigen::VectorXd& d)
{
    Triplets t;
    for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
    return from_triplets(static_cast<int>(d.size()), t);
}

} // namespace detail

/// Element integrals of psi_a^(da) psi_c^(dc) w(x) for all local pairs,
/// evaluated with the basis quadrature. Returns integrals[e][a][c].
template <class Weight>
std::vector<std::array<std::array<double, 5>, 5>> element_integrals(const Basis1D& b, int da, int dc, Weight&& w)
{
    const double h = b.element_width();
    std::vector<std::array<std::array<double, 5>, 5>> out(b.element_count());
    for (int e = 0; e < b.element_count(); ++e) {
        auto& loc = out[e];
        for (auto& row : loc) row.fill(0.0);
        const double left = b.origin + e * h;
        for (std::size_t q = 0; q < b.quadrature.size(); ++q) {
            const double t = b.quadrature.points[q];
            const double x = left + h * t;
            const double wq = b.quadrature.weights[q] * h * w(x);
            const auto s = lagrange_shape(b.degree, t);
            for (int a = 0; a <= b.degree; ++a) {
                const double fa = da ? s.deriv[a] / h : s.value[a];
                for (int c = 0; c <= b.degree; ++c) {
                    const double fc = dc ? s.deriv[c] / h : s.value[c];
                    loc[a][c] += wq * fa * fc;
                }
            }
        }
    }
    return out;
}

template <class Weight>
SparseMatrix assemble_weighted_matrix(const Basis1D& b, int da, int dc, Weight&& w)
{
    const auto loc = element_integrals(b, da, dc, std::forward<Weight>(w));
    Triplets t;
    detail::for_each_element_pair(b, [&](int e, int a, int c, int ia, int ic) { t.emplace_back(ia, ic, loc[e][a][c]); });
    return detail::from_triplets(b.dim(), t);
}

inline std::pair<SparseMatrix, SparseMatrix> assemble_standard(const Basis1D& b)
{
    auto one = [](double) { return 1.0; };
    return {assemble_weighted_matrix(b, 1, 1, one), assemble_weighted_matrix(b, 0, 0, one)};
}

/// All nine consistent 1D matrices. The profile is evaluated at the basis
/// coordinate, so a y-basis gives the geometric weights; the x-weights
/// (x^2, x) use the basis coordinate too, which is what an x-basis needs.
inline Matrix1DSet assemble_weighted(const Basis1D& b, const ProfileFn& profile)
{
    const auto& L = profile.value;
    const auto& dL = profile.derivative;
    for (int e = 0; e <= b.subintervals; ++e) {
        const double y = std::clamp(static_cast<double>(e) / b.subintervals, 0.0, 1.0);
        if (!(L(y) > 0.0)) throw GeometryError("assemble_weighted: non-positive profile sample");
    }
    // Profile weights are defined on [0, 1]; the basis may live on [-1/2, 1/2].
    const double o = b.origin;
    auto prof = [&](double x) { return L(x - o); };
    auto dprof = [&](double x) { return dL(x - o); };

    Matrix1DSet s;
    std::tie(s.A, s.M) = assemble_standard(b);
    s.B1 = assemble_weighted_matrix(b, 1, 1, prof);
    s.B2 = assemble_weighted_matrix(b, 1, 1, [](double x) { return x * x; });
    s.C1 = assemble_weighted_matrix(b, 1, 0, [](double x) { return x; });
    s.C2 = assemble_weighted_matrix(b, 1, 0, dprof);
    s.M1 = assemble_weighted_matrix(b, 0, 0, [&](double x) { return 1.0 / prof(x); });
    s.M2 = assemble_weighted_matrix(b, 0, 0, [&](double x) {
        const double d = dprof(x);
        return d * d / prof(x);
    });
    s.M3 = assemble_weighted_matrix(b, 0, 0, prof);
    return s;
}

/// Rows of a full-grid (Neumann-sized) matrix that belong to the retained
/// dofs of `b`: a q x (N+1) matrix. Right-hand sides use it so that nodal
/// data on trimmed Dirichlet nodes still enters the load.
inline SparseMatrix retained_rows(const Basis1D& b, const SparseMatrix& full)
{
    if (full.rows() != b.subintervals + 1 || full.cols() != b.subintervals + 1)
        throw ShapeError("retained_rows: expected a full-grid matrix");
    Triplets t;
    for (int c = 0; c < full.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(full, c); it; ++it) {
            const int r = b.dof_of_node(static_cast<int>(it.row()));
            if (r >= 0) t.emplace_back(r, it.col(), it.value());
        }
    SparseMatrix m(b.dim(), b.subintervals + 1);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

/// Lumped P_1 matrices; integrals of products use the elementwise linear
/// interpolant through endpoint values (trapezoidal rule per element).
inline LumpedSet assemble_lumped(const Basis1D& b, const ProfileFn& profile)
{
    if (b.degree != 1) throw UnsupportedError("assemble_lumped: only P1 elements can be lumped");
    const int n = b.dim();
    const double h = b.element_width();
    const double o = b.origin;
    auto L = [&](double x) { return profile.value(x - o); };
    auto dL = [&](double x) { return profile.derivative(x - o); };

    Eigen::VectorXd m0 = Eigen::VectorXd::Zero(n), d1(n), d2(n), d3(n);
    Triplets tc, ta1, ta2;
    for (int e = 0; e < b.element_count(); ++e) {
        const double xa = b.node(e), xb = b.node(e + 1);
        const int ia = b.dof_of_node(e), ib = b.dof_of_node(e + 1);
        const double slope[2] = {-1.0 / h, 1.0 / h};
        const int dofs[2] = {ia, ib};
        const double trap_L = 0.5 * h * (L(xa) + L(xb));
        const double trap_x2 = 0.5 * h * (xa * xa + xb * xb);
        for (int a = 0; a < 2; ++a) {
            if (dofs[a] < 0) continue;
            m0[dofs[a]] += 0.5 * h;
            for (int c = 0; c < 2; ++c) {
                if (dofs[c] < 0) continue;
                // int psi_a' psi_c over the element = slope_a * h/2
                tc.emplace_back(dofs[a], dofs[c], slope[a] * 0.5 * h);
                ta1.emplace_back(dofs[a], dofs[c], slope[a] * slope[c] * trap_L);
                ta2.emplace_back(dofs[a], dofs[c], slope[a] * slope[c] * trap_x2);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        const double x = b.node(b.node_of_dof(i));
        d1[i] = L(x);
        d2[i] = dL(x);
        d3[i] = x;
    }
    LumpedSet s;
    s.M0 = detail::diagonal(m0);
    s.C = detail::from_triplets(n, tc);
    s.A1 = detail::from_triplets(n, ta1);
    s.A2 = detail::from_triplets(n, ta2);
    s.D1 = detail::diagonal(d1);
    s.D2 = detail::diagonal(d2);
    s.D3 = detail::diagonal(d3);
    return s;
}

} // namespace mofem

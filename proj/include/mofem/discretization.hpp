#pragma once

// A tensor-product discretization of a (mapped) domain: both 1D bases, their
// matrix sets, nodal sampling on the physical grid and L2 error norms.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mofem/fem1d.hpp"
#include "mofem/geometry.hpp"
#include "mofem/sylvester.hpp"

namespace mofem {

/// Scalar field on the physical domain, f(x_L, y).
using Field2D = std::function<double(double, double)>;

/// Fills the extended (retained rows x all nodes) mass matrices of a direction.
inline void attach_extended_mass(DirectionalSets& s, const ProfileFn& profile)
{
    const Basis1D& b = s.basis;
    const Basis1D full = build_basis(b.degree, b.subintervals, BCKind::Neumann, b.origin);
    const double o = b.origin;
    s.M_ext = retained_rows(b, assemble_standard(full).second);
    s.M3_ext = retained_rows(b, assemble_weighted_matrix(full, 0, 0, [&](double x) { return profile.value(x - o); }));
    if (b.degree == 1) {
        const LumpedSet l = assemble_lumped(full, profile);
        s.M0_ext = retained_rows(b, l.M0);
        s.M0D1_ext = retained_rows(b, SparseMatrix(l.M0 * l.D1));
    }
}

struct DiscretizationConfig {
    DomainSpec domain = square_domain();
    int degree = 1;
    int nx = 24;
    int ny = 24;
    BCKind bc = BCKind::Dirichlet;
    bool lumped = false;
};

class Discretization {
public:
    explicit Discretization(DiscretizationConfig cfg) : cfg_(std::move(cfg))
    {
        if (cfg_.lumped && cfg_.degree != 1) throw UnsupportedError("lumping is only available for P1 elements");
        x_.basis = build_basis(cfg_.degree, cfg_.nx, cfg_.bc, cfg_.domain.x_origin());
        y_.basis = build_basis(cfg_.degree, cfg_.ny, cfg_.bc, 0.0);
        x_.consistent = assemble_weighted(x_.basis, cfg_.domain.profile);
        y_.consistent = assemble_weighted(y_.basis, cfg_.domain.profile);
        if (cfg_.degree == 1) {
            x_.lumped = assemble_lumped(x_.basis, cfg_.domain.profile);
            y_.lumped = assemble_lumped(y_.basis, cfg_.domain.profile);
        }
        attach_extended_mass(x_, cfg_.domain.profile);
        attach_extended_mass(y_, cfg_.domain.profile);
        xs_ = x_.basis.dof_coordinates();
        ys_ = y_.basis.dof_coordinates();
    }

    const DiscretizationConfig& config() const { return cfg_; }
    const DomainSpec& domain() const { return cfg_.domain; }
    const DirectionalSets& x() const { return x_; }
    const DirectionalSets& y() const { return y_; }
    int qx() const { return x_.basis.dim(); }
    int qy() const { return y_.basis.dim(); }
    bool lumped() const { return cfg_.lumped; }

    /// Reference coordinates of the retained nodes.
    const Vector& x_nodes() const { return xs_; }
    const Vector& y_nodes() const { return ys_; }

    /// Nodal values of a physical-domain field: entry (j, i) is f at node (x_i L(y_j), y_j).
    Matrix sample(const Field2D& f) const
    {
        Matrix U(qy(), qx());
        for (int j = 0; j < qy(); ++j) {
            const double L = cfg_.domain.L(ys_[j]);
            for (int i = 0; i < qx(); ++i) U(j, i) = f(xs_[i] * L, ys_[j]);
        }
        return U;
    }

    /// Nodal values on the full (N_y+1) x (N_x+1) node grid, boundary included.
    Matrix sample_full(const Field2D& f) const
    {
        const auto& bx = x_.basis;
        Matrix F(cfg_.ny + 1, cfg_.nx + 1);
        for (int j = 0; j <= cfg_.ny; ++j) {
            const double y = y_.basis.node(j);
            const double L = cfg_.domain.L(y);
            for (int i = 0; i <= cfg_.nx; ++i) F(j, i) = f(bx.node(i) * L, y);
        }
        return F;
    }

    /// Embeds retained-grid values into the full node grid with `boundary` on trimmed nodes.
    Matrix extend(const Matrix& U, double boundary = 0.0) const
    {
        check_shape(U);
        Matrix F = Matrix::Constant(cfg_.ny + 1, cfg_.nx + 1, boundary);
        for (int j = 0; j < qy(); ++j)
            for (int i = 0; i < qx(); ++i) F(y_.basis.node_of_dof(j), x_.basis.node_of_dof(i)) = U(j, i);
        return F;
    }

    GridFunction wrap(Matrix values) const
    {
        return {std::move(values), cfg_.bc, cfg_.degree, cfg_.nx, cfg_.ny};
    }

    DiscreteSystem elliptic(double gamma) const { return elliptic_operator(x_, y_, gamma, cfg_.lumped); }

    DiscreteSystem parabolic(double d_u, double tau) const
    {
        return parabolic_operator(x_, y_, d_u, tau, cfg_.lumped);
    }

    /// Discrete L2 norm built from nodal values with trapezoidal weights on
    /// the full grid and the Jacobian L(y). Trimmed Dirichlet nodes carry the
    /// exact boundary value, so only the retained nodes contribute to the error.
    double l2_error_nodal(const Matrix& U, const Field2D& exact) const
    {
        check_shape(U);
        const double hx = 1.0 / cfg_.nx, hy = 1.0 / cfg_.ny;
        double s = 0.0;
        for (int j = 0; j < qy(); ++j) {
            const int mj = y_.basis.node_of_dof(j);
            const double wy = (mj == 0 || mj == cfg_.ny) ? 0.5 * hy : hy;
            const double L = cfg_.domain.L(ys_[j]);
            for (int i = 0; i < qx(); ++i) {
                const int mi = x_.basis.node_of_dof(i);
                const double wx = (mi == 0 || mi == cfg_.nx) ? 0.5 * hx : hx;
                const double e = U(j, i) - exact(xs_[i] * L, ys_[j]);
                s += wx * wy * L * e * e;
            }
        }
        return std::sqrt(s);
    }

    /// L2 norm of u_h - u on the physical domain with (k+2)-point Gauss per
    /// element and direction on the reference rectangle, weighted by L(y).
    double l2_error_quadrature(const Matrix& U, const Field2D& exact) const
    {
        check_shape(U);
        const int k = cfg_.degree;
        const auto rule = gauss_legendre(k + 2);
        const auto& bx = x_.basis;
        const auto& by = y_.basis;
        const double hx = bx.element_width(), hy = by.element_width();
        std::vector<LocalShape> shapes;
        for (double t : rule.points) shapes.push_back(lagrange_shape(k, t));

        double s = 0.0;
        for (int ey = 0; ey < by.element_count(); ++ey) {
            int dy[5];
            for (int a = 0; a <= k; ++a) dy[a] = by.dof_of_node(ey * k + a);
            for (int ex = 0; ex < bx.element_count(); ++ex) {
                int dx[5];
                for (int a = 0; a <= k; ++a) dx[a] = bx.dof_of_node(ex * k + a);
                for (std::size_t qy_ = 0; qy_ < rule.size(); ++qy_) {
                    const double y = ey * hy + hy * rule.points[qy_];
                    const double L = cfg_.domain.L(y);
                    for (std::size_t qx_ = 0; qx_ < rule.size(); ++qx_) {
                        const double x = bx.origin + ex * hx + hx * rule.points[qx_];
                        double uh = 0.0;
                        for (int b = 0; b <= k; ++b) {
                            if (dy[b] < 0) continue;
                            double row = 0.0;
                            for (int a = 0; a <= k; ++a)
                                if (dx[a] >= 0) row += U(dy[b], dx[a]) * shapes[qx_].value[a];
                            uh += row * shapes[qy_].value[b];
                        }
                        const double e = uh - exact(x * L, y);
                        s += rule.weights[qx_] * rule.weights[qy_] * hx * hy * L * e * e;
                    }
                }
            }
        }
        return std::sqrt(s);
    }

private:
    void check_shape(const Matrix& U) const
    {
        if (U.rows() != qy() || U.cols() != qx()) throw ShapeError("Discretization: grid function shape mismatch");
    }

    DiscretizationConfig cfg_;
    DirectionalSets x_, y_;
    Vector xs_, ys_;
};

} // namespace mofem

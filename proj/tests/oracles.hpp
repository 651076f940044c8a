#pragma once

// Independent reference implementations used only by the tests: Lagrange
// shape functions written from scratch, brute-force 1D and 2D assembly with
// high-order quadrature, vector-form PCG and finite-difference Laplacians.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mofem/discretization.hpp"
#include "mofem/quadrature.hpp"

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Value and derivative of the a-th Lagrange polynomial on k+1 equispaced nodes of [0,1].
inline void lagrange(int k, int a, double t, double& v, double& dv)
{
    v = 1.0;
    dv = 0.0;
    const double ta = static_cast<double>(a) / k;
    for (int m = 0; m <= k; ++m) {
        if (m == a) continue;
        const double tm = static_cast<double>(m) / k;
        double prod = 1.0 / (ta - tm);
        for (int l = 0; l <= k; ++l) {
            if (l == a || l == m) continue;
            const double tl = static_cast<double>(l) / k;
            prod *= (t - tl) / (ta - tl);
        }
        dv += prod;
        v *= (t - tm) / (ta - tm);
    }
}

/// Global dof of local node a of element e, or -1 if trimmed (Dirichlet ends).
inline int dof(int k, int N, bool dirichlet, int e, int a)
{
    const int node = e * k + a;
    if (!dirichlet) return node;
    if (node == 0 || node == N) return -1;
    return node - 1;
}

/// M_ij = integral over [x0, x0+1] of w(x) d^p psi_i d^r psi_j with p, r in {0, 1}.
inline Matrix weighted_1d(int k, int N, bool dirichlet, double x0, const std::function<double(double)>& w, int p, int r,
                          int points = 64)
{
    const int q = dirichlet ? N - 1 : N + 1;
    Matrix out = Matrix::Zero(q, q);
    const auto rule = mofem::gauss_legendre(points);
    const double he = static_cast<double>(k) / N;
    for (int e = 0; e < N / k; ++e)
        for (std::size_t g = 0; g < rule.size(); ++g) {
            const double t = rule.points[g];
            const double x = x0 + e * he + he * t;
            const double wt = rule.weights[g] * he * w(x);
            for (int a = 0; a <= k; ++a) {
                const int i = dof(k, N, dirichlet, e, a);
                if (i < 0) continue;
                double va, da;
                lagrange(k, a, t, va, da);
                const double fa = p ? da / he : va;
                for (int b = 0; b <= k; ++b) {
                    const int j = dof(k, N, dirichlet, e, b);
                    if (j < 0) continue;
                    double vb, db;
                    lagrange(k, b, t, vb, db);
                    out(i, j) += wt * fa * (r ? db / he : vb);
                }
            }
        }
    return out;
}

/// Full 2D Galerkin matrices on the mapped domain: K = integral of grad^T Hhat grad,
/// M = integral of L(y) psi psi, both over the reference rectangle with a
/// tensor Gauss rule. Unknown ordering is column-stacked: index = ix * qy + iy.
inline void assemble_2d(const mofem::Discretization& d, Matrix& K, Matrix& M, int points = 10)
{
    const auto& dom = d.domain();
    const int k = d.config().degree;
    const int Nx = d.config().nx, Ny = d.config().ny;
    const bool dir = d.config().bc == mofem::BCKind::Dirichlet;
    const int qx = d.qx(), qy = d.qy();
    K = Matrix::Zero(qx * qy, qx * qy);
    M = K;
    const auto rule = mofem::gauss_legendre(points);
    const double hx = static_cast<double>(k) / Nx, hy = static_cast<double>(k) / Ny;
    const double x0 = dom.x_origin();
    for (int ey = 0; ey < Ny / k; ++ey)
        for (int ex = 0; ex < Nx / k; ++ex)
            for (std::size_t gy = 0; gy < rule.size(); ++gy)
                for (std::size_t gx = 0; gx < rule.size(); ++gx) {
                    const double tx = rule.points[gx], ty = rule.points[gy];
                    const double x = x0 + ex * hx + hx * tx, y = ey * hy + hy * ty;
                    const double w = rule.weights[gx] * rule.weights[gy] * hx * hy;
                    const double L = dom.L(y), dL = dom.dL(y);
                    Eigen::Matrix2d H;
                    H << 1.0 / L + x * x * dL * dL / L, -x * dL, -x * dL, L;
                    for (int a = 0; a <= k; ++a)
                        for (int b = 0; b <= k; ++b) {
                            const int ix = dof(k, Nx, dir, ex, a), iy = dof(k, Ny, dir, ey, b);
                            if (ix < 0 || iy < 0) continue;
                            double va, da, vb, db;
                            lagrange(k, a, tx, va, da);
                            lagrange(k, b, ty, vb, db);
                            const Eigen::Vector2d g1(da / hx * vb, va * db / hy);
                            for (int c = 0; c <= k; ++c)
                                for (int e = 0; e <= k; ++e) {
                                    const int jx = dof(k, Nx, dir, ex, c), jy = dof(k, Ny, dir, ey, e);
                                    if (jx < 0 || jy < 0) continue;
                                    double vc, dc, ve, de;
                                    lagrange(k, c, tx, vc, dc);
                                    lagrange(k, e, ty, ve, de);
                                    const Eigen::Vector2d g2(dc / hx * ve, vc * de / hy);
                                    const int r = ix * qy + iy, s = jx * qy + jy;
                                    K(r, s) += w * g1.dot(H * g2);
                                    M(r, s) += w * L * va * vb * vc * ve;
                                }
                        }
                }
}

/// Textbook preconditioned CG on K x = b with preconditioner solve `Pinv`.
/// Records every iterate (entry 0 is x0).
inline std::vector<Vector> vector_pcg(const Matrix& K, const Matrix& Pinv, const Vector& b, Vector x, int iterations)
{
    std::vector<Vector> xs{x};
    Vector r = b - K * x;
    Vector z = Pinv * r;
    Vector p = z;
    double rz = r.dot(z);
    for (int s = 0; s < iterations; ++s) {
        const Vector Kp = K * p;
        const double alpha = rz / p.dot(Kp);
        x += alpha * p;
        r -= alpha * Kp;
        xs.push_back(x);
        z = Pinv * r;
        const double rz1 = r.dot(z);
        p = z + (rz1 / rz) * p;
        rz = rz1;
    }
    return xs;
}

/// Fourth-order central finite-difference Laplacian of u at (x, y).
inline double fd_laplacian(const std::function<double(double, double)>& u, double x, double y, double h = 1e-3)
{
    auto d2 = [&](double a0, double a1, double a2, double a3, double a4) {
        return (-a0 + 16 * a1 - 30 * a2 + 16 * a3 - a4) / (12 * h * h);
    };
    return d2(u(x - 2 * h, y), u(x - h, y), u(x, y), u(x + h, y), u(x + 2 * h, y)) +
           d2(u(x, y - 2 * h), u(x, y - h), u(x, y), u(x, y + h), u(x, y + 2 * h));
}

inline double rel_diff(const Matrix& a, const Matrix& b)
{
    const double nb = b.norm();
    return nb == 0.0 ? a.norm() : (a - b).norm() / nb;
}

} // namespace oracle

#pragma once

// Term-list representation of 2D discrete operators, U -> sum_i G_i U H_i.
//
// Orientation: rows of U index y-nodes and columns index x-nodes, so the
// y-direction matrices act from the left and the x-direction ones from the
// right. With column stacking, vec(G U H) = (H^T kron G) vec(U).

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mofem/errors.hpp"
#include "mofem/fem1d.hpp"

namespace mofem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Nodal coefficients on the retained grid, q_y x q_x.
struct GridFunction {
    Matrix values;
    BCKind bc = BCKind::Dirichlet;
    int degree = 1;
    int nx = 0;
    int ny = 0;
};

inline Vector vec(const Matrix& U) { return Eigen::Map<const Vector>(U.data(), U.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols)
{
    if (v.size() != rows * cols) throw ShapeError("unvec: size mismatch");
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline double frobenius_dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

struct SylvesterTerm {
    SparseMatrix left;   // q_y x q_y
    SparseMatrix right;  // q_x x q_x
    std::string label;
};

namespace detail {

inline double max_abs(const SparseMatrix& m)
{
    double r = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
}

inline bool nearly_equal(const SparseMatrix& a, const SparseMatrix& b, double rtol = 1e-13)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    const double scale = std::max({max_abs(a), max_abs(b), 1e-300});
    return max_abs(SparseMatrix(a - b)) <= rtol * scale;
}

inline bool is_symmetric(const SparseMatrix& m, double rtol = 1e-13)
{
    return nearly_equal(m, SparseMatrix(m.transpose()), rtol);
}

} // namespace detail

class SylvesterOperator {
public:
    SylvesterOperator() = default;

    /// Terms whose factors are entrywise below 1e-15 are dropped.
    explicit SylvesterOperator(std::vector<SylvesterTerm> terms, bool positive_definite = false)
        : positive_definite_(positive_definite)
    {
        for (auto& t : terms) {
            if (t.left.rows() != t.left.cols() || t.right.rows() != t.right.cols())
                throw ShapeError("SylvesterOperator: factors must be square");
            if (detail::max_abs(t.left) < 1e-15 || detail::max_abs(t.right) < 1e-15) continue;
            if (!terms_.empty() &&
                (t.left.rows() != terms_.front().left.rows() || t.right.rows() != terms_.front().right.rows()))
                throw ShapeError("SylvesterOperator: terms have inconsistent sizes");
            terms_.push_back(std::move(t));
        }
        if (terms_.empty()) throw OperatorError("SylvesterOperator: every term vanished");
        rows_ = terms_.front().left.rows();
        cols_ = terms_.front().right.rows();
        symmetric_ = detect_symmetry();
        if (!symmetric_) positive_definite_ = false;
    }

    const std::vector<SylvesterTerm>& terms() const { return terms_; }
    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    std::size_t size() const { return terms_.size(); }

    /// Self-adjoint with respect to the Frobenius inner product.
    bool is_symmetric() const { return symmetric_; }
    bool is_positive_definite() const { return positive_definite_; }

private:
    bool detect_symmetry() const
    {
        for (const auto& t : terms_) {
            if (detail::is_symmetric(t.left) && detail::is_symmetric(t.right)) continue;
            const SparseMatrix lt = t.left.transpose(), rt = t.right.transpose();
            bool found = false;
            for (const auto& s : terms_)
                if (detail::nearly_equal(s.left, lt) && detail::nearly_equal(s.right, rt)) {
                    found = true;
                    break;
                }
            if (!found) return false;
        }
        return true;
    }

    std::vector<SylvesterTerm> terms_;
    Eigen::Index rows_ = 0, cols_ = 0;
    bool symmetric_ = false;
    bool positive_definite_ = false;
};

/// out = sum_i G_i U H_i using only an O(q_y) work vector.
inline void apply_into(const SylvesterOperator& op, const Matrix& U, Matrix& out, Vector& work)
{
    if (U.rows() != op.rows() || U.cols() != op.cols()) throw ShapeError("apply: operand shape mismatch");
    if (out.rows() != U.rows() || out.cols() != U.cols()) out.resize(U.rows(), U.cols());
    work.resize(U.rows());
    out.setZero();
    for (const auto& t : op.terms()) {
        for (Eigen::Index j = 0; j < t.right.outerSize(); ++j) {
            work.setZero();
            bool any = false;
            for (SparseMatrix::InnerIterator it(t.right, j); it; ++it) {
                work.noalias() += it.value() * U.col(it.index());
                any = true;
            }
            if (any) out.col(j).noalias() += t.left * work;
        }
    }
}

inline Matrix apply(const SylvesterOperator& op, const Matrix& U)
{
    Matrix out;
    Vector work;
    apply_into(op, U, out, work);
    return out;
}

inline Matrix apply(const SylvesterTerm& t, const Matrix& U)
{
    if (U.rows() != t.left.cols() || U.cols() != t.right.rows()) throw ShapeError("apply: operand shape mismatch");
    return t.left * (U * t.right);
}

inline GridFunction apply(const SylvesterOperator& op, const GridFunction& U)
{
    GridFunction out = U;
    out.values = apply(op, U.values);
    return out;
}

constexpr double kronecker_size_guard = 2e5;

/// Sparse Kronecker (vector-form) matrix with to_kronecker(op) vec(U) = vec(apply(op, U)).
inline SparseMatrix to_kronecker(const SylvesterOperator& op)
{
    const Eigen::Index qy = op.rows(), qx = op.cols();
    if (static_cast<double>(qx) * static_cast<double>(qy) > kronecker_size_guard)
        throw SizeGuardError("to_kronecker: q_x * q_y exceeds the desk-scale guard");
    Triplets trip;
    for (const auto& t : op.terms()) {
        // vec(G U H) = (H^T kron G) vec(U): block (r, c) of H^T is H(c, r).
        for (Eigen::Index c = 0; c < t.right.outerSize(); ++c)
            for (SparseMatrix::InnerIterator h(t.right, c); h; ++h) {
                const Eigen::Index br = h.col(), bc = h.row();
                for (Eigen::Index gc = 0; gc < t.left.outerSize(); ++gc)
                    for (SparseMatrix::InnerIterator g(t.left, gc); g; ++g)
                        trip.emplace_back(br * qy + g.row(), bc * qy + g.col(), h.value() * g.value());
            }
    }
    SparseMatrix K(qx * qy, qx * qy);
    K.setFromTriplets(trip.begin(), trip.end());
    K.prune([](Eigen::Index, Eigen::Index, double v) { return v != 0.0; });
    K.makeCompressed();
    return K;
}

/// Left factor set (y-direction) and right factor set (x-direction).
struct DirectionalSets {
    Basis1D basis;
    Matrix1DSet consistent;
    std::optional<LumpedSet> lumped;
    /// Mass matrices M, M3 and lumped M0, M0 D1 with rows for the retained
    /// dofs and columns for all N+1 nodes (see retained_rows). Optional.
    SparseMatrix M_ext, M3_ext, M0_ext, M0D1_ext;
};

/// A discrete operator paired with the mass form used on right-hand sides.
struct DiscreteSystem {
    SylvesterOperator op;
    SylvesterTerm mass;     // F -> mass.left * F * mass.right
    SparseMatrix ext_left;  // q_y x (N_y+1)
    SparseMatrix ext_right; // (N_x+1) x q_x

    /// Load for nodal data F, given either on the retained grid (q_y x q_x)
    /// or on the full node grid ((N_y+1) x (N_x+1)). Only the latter accounts
    /// for nonzero data on trimmed Dirichlet nodes.
    Matrix rhs(const Matrix& F) const
    {
        if (F.rows() == mass.left.rows() && F.cols() == mass.right.rows()) return apply(mass, F);
        if (ext_left.size() > 0 && F.rows() == ext_left.cols() && F.cols() == ext_right.rows())
            return ext_left * (F * ext_right);
        throw ShapeError("rhs: nodal data has neither the retained nor the full-grid shape");
    }
};

namespace detail {

inline SparseMatrix scaled(const SparseMatrix& m, double s) { return SparseMatrix(s * m); }

inline const LumpedSet& require_lumped(const DirectionalSets& s)
{
    if (!s.lumped) throw UnsupportedError("lumped operator requested but lumped matrices were not assembled");
    return *s.lumped;
}

inline SparseMatrix inverse_diagonal(const SparseMatrix& d)
{
    SparseMatrix r = d;
    for (int k = 0; k < r.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(r, k); it; ++it) it.valueRef() = 1.0 / it.value();
    return r;
}

/// Stiffness terms common to the elliptic and parabolic operators, scaled by `scale`.
inline std::vector<SylvesterTerm> stiffness_terms(const DirectionalSets& x, const DirectionalSets& y, bool lumped,
                                                  double scale)
{
    std::vector<SylvesterTerm> t;
    if (!lumped) {
        const auto& X = x.consistent;
        const auto& Y = y.consistent;
        t.push_back({scaled(Y.M1, scale), X.A, "M1.U.A"});
        t.push_back({scaled(Y.B1, scale), X.M, "B1.U.M"});
        t.push_back({scaled(Y.M2, scale), X.B2, "M2.U.B2"});
        t.push_back({scaled(Y.C2, -scale), X.C1, "-C2.U.C1"});
        t.push_back({scaled(SparseMatrix(Y.C2.transpose()), -scale), SparseMatrix(X.C1.transpose()), "-C2t.U.C1t"});
    } else {
        const auto& X = require_lumped(x);
        const auto& Y = require_lumped(y);
        const SparseMatrix d1inv = inverse_diagonal(Y.D1);
        const SparseMatrix m0d1inv = Y.M0 * d1inv;
        t.push_back({scaled(m0d1inv, scale), x.consistent.A, "M0D1^-1.U.A"});
        t.push_back({scaled(Y.A1, scale), X.M0, "A1.U.M0"});
        t.push_back({scaled(SparseMatrix(m0d1inv * Y.D2 * Y.D2), scale), X.A2, "M0D1^-1D2^2.U.A2"});
        t.push_back({scaled(SparseMatrix(Y.C * Y.D2), -scale), SparseMatrix(X.C * X.D3), "-CD2.U.CD3"});
        t.push_back({scaled(SparseMatrix(Y.D2 * Y.C.transpose()), -scale), SparseMatrix(X.D3 * X.C.transpose()),
                     "-D2Ct.U.D3Ct"});
    }
    return t;
}

inline void attach_extended_mass(DiscreteSystem& s, const DirectionalSets& x, const DirectionalSets& y, bool lumped)
{
    const SparseMatrix& l = lumped ? y.M0D1_ext : y.M3_ext;
    const SparseMatrix& r = lumped ? x.M0_ext : x.M_ext;
    if (l.size() == 0 || r.size() == 0) return;
    s.ext_left = l;
    s.ext_right = SparseMatrix(r.transpose());
}

inline SylvesterTerm mass_term(const DirectionalSets& x, const DirectionalSets& y, bool lumped)
{
    if (!lumped) return {y.consistent.M3, x.consistent.M, "M3.U.M"};
    const auto& X = require_lumped(x);
    const auto& Y = require_lumped(y);
    return {SparseMatrix(Y.M0 * Y.D1), X.M0, "M0D1.U.M0"};
}

} // namespace detail

/// Discrete -Laplace + gamma on the mapped domain:
/// M1 U A + (B1 + gamma M3) U M + M2 U B2 - C2 U C1 - C2^T U C1^T = M3 F M,
/// or its lumped counterpart with right-hand side M0 D1 F M0.
inline DiscreteSystem elliptic_operator(const DirectionalSets& x, const DirectionalSets& y, double gamma, bool lumped)
{
    if (gamma < 0.0) throw DomainError("elliptic_operator: gamma must be non-negative");
    if (x.basis.bc != y.basis.bc) throw UnsupportedError("elliptic_operator: mixed boundary conditions");
    if (x.basis.bc == BCKind::Neumann && !(gamma > 0.0))
        throw OperatorError("elliptic_operator: gamma = 0 with Neumann conditions gives a singular operator");
    auto terms = detail::stiffness_terms(x, y, lumped, 1.0);
    SylvesterTerm mass = detail::mass_term(x, y, lumped);
    if (gamma > 0.0) {
        // Fold the reaction term into the term sharing the right factor.
        auto& t = terms[1];
        t.left = SparseMatrix(t.left + gamma * mass.left);
        t.label = lumped ? "(A1+gM0D1).U.M0" : "(B1+gM3).U.M";
    }
    DiscreteSystem s{SylvesterOperator(std::move(terms), true), std::move(mass), {}, {}};
    detail::attach_extended_mass(s, x, y, lumped);
    return s;
}

/// Implicit IMEX-Euler operator L(U) = mass(U) + d_u tau stiffness(U); the
/// right-hand side is mass(U + tau f(U)).
inline DiscreteSystem parabolic_operator(const DirectionalSets& x, const DirectionalSets& y, double d_u, double tau,
                                         bool lumped)
{
    if (!(d_u > 0.0)) throw DomainError("parabolic_operator: diffusion coefficient must be positive");
    if (tau < 0.0) throw DomainError("parabolic_operator: timestep must be positive");
    if (x.basis.bc != y.basis.bc) throw UnsupportedError("parabolic_operator: mixed boundary conditions");
    auto terms = detail::stiffness_terms(x, y, lumped, d_u * tau);
    SylvesterTerm mass = detail::mass_term(x, y, lumped);
    auto& t = terms[1];
    t.left = SparseMatrix(t.left + mass.left);
    t.label = lumped ? "(M0D1+dtA1).U.M0" : "(M3+dtB1).U.M";
    DiscreteSystem s{SylvesterOperator(std::move(terms), true), std::move(mass), {}, {}};
    detail::attach_extended_mass(s, x, y, lumped);
    return s;
}

} // namespace mofem

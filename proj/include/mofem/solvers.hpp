#pragma once

// Solvers for (multiterm) Sylvester equations:
//  - spectral reduction for two-term operators,
//  - the closed-form P1 Dirichlet variant on the square,
//  - matrix-oriented PCG with single-term preconditioners,
//  - a sparse Kronecker direct solve used as the oracle.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "mofem/errors.hpp"
#include "mofem/sylvester.hpp"

namespace mofem {

enum class StopReason { Tolerance, Increment, MaxIter, Direct };

inline const char* to_string(StopReason r)
{
    switch (r) {
    case StopReason::Tolerance: return "tolerance";
    case StopReason::Increment: return "increment";
    case StopReason::MaxIter: return "max_iter";
    case StopReason::Direct: return "direct";
    }
    return "?";
}

struct SolveReport {
    Matrix solution;
    int iterations = 0;
    std::vector<double> residual_history;  // Frobenius norms, entry 0 is the initial residual
    StopReason stop_reason = StopReason::Direct;
    double wall_time = 0.0;                // seconds
    std::string method;

    bool converged() const { return stop_reason != StopReason::MaxIter; }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Matrix dense(const SparseMatrix& m) { return Matrix(m); }

inline bool is_spd(const Matrix& m)
{
    if (!m.isApprox(m.transpose(), 1e-12)) return false;
    Eigen::LLT<Matrix> llt(m);
    return llt.info() == Eigen::Success;
}

/// Flip each column so its largest-magnitude entry is positive.
inline void fix_signs(Matrix& V)
{
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        Eigen::Index i;
        V.col(j).cwiseAbs().maxCoeff(&i);
        if (V(i, j) < 0.0) V.col(j) *= -1.0;
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spectral reduction

/// Diagonalization data for G1 U H1 + G2 U H2 = B with G1, H2 SPD, which is
/// equivalent to Z1 U + U Z2 = F with Z1 = G1^-1 G2, Z2 = H1 H2^-1, F = G1^-1 B H2^-1.
struct SpectralCache {
    Matrix X1, X1inv, X2, X2inv;
    Vector lambda1, lambda2;
    Matrix kernel;  // 1 / (lambda1_i + lambda2_j)
    Matrix Z1, Z2;

    /// U = X1 (kernel o (X1^-1 F X2)) X2^-1, written in terms of the mass-weighted rhs B.
    Matrix solve(const Matrix& B) const
    {
        if (B.rows() != V.rows() || B.cols() != W.rows()) throw ShapeError("SpectralCache::solve: rhs shape mismatch");
        const Matrix Fhat = V.transpose() * B * W;
        return V * kernel.cwiseProduct(Fhat) * W.transpose();
    }

    Matrix V, W;  // G1- and H2-orthonormal eigenvectors
};

namespace detail {

struct Pencil {
    Matrix V;
    Vector lambda;
};

/// Solves S x = lambda T x with T SPD; x^T T x = 1, ascending eigenvalues.
inline Pencil symmetric_pencil(const Matrix& S, const Matrix& T)
{
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(S, T, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw FactorizationError("spectral reduction: eigensolver failed");
    Pencil p{es.eigenvectors(), es.eigenvalues()};
    fix_signs(p.V);
    return p;
}

} // namespace detail

inline SpectralCache build_spectral_cache(const SylvesterOperator& op)
{
    if (op.size() != 2) throw UnsupportedError("solve_reduced: operator must have exactly two terms");
    const auto& t = op.terms();
    // Pick the term order making G1 and H2 SPD (and the other two factors symmetric).
    int first = -1;
    for (int a = 0; a < 2 && first < 0; ++a) {
        const Matrix G1 = detail::dense(t[a].left), H1 = detail::dense(t[a].right);
        const Matrix G2 = detail::dense(t[1 - a].left), H2 = detail::dense(t[1 - a].right);
        if (detail::is_spd(G1) && detail::is_spd(H2) && G2.isApprox(G2.transpose(), 1e-12) &&
            H1.isApprox(H1.transpose(), 1e-12))
            first = a;
    }
    if (first < 0) throw UnsupportedError("solve_reduced: no term ordering with SPD mass factors");
    const Matrix G1 = detail::dense(t[first].left), H1 = detail::dense(t[first].right);
    const Matrix G2 = detail::dense(t[1 - first].left), H2 = detail::dense(t[1 - first].right);

    const auto p1 = detail::symmetric_pencil(G2, G1);
    const auto p2 = detail::symmetric_pencil(H1, H2);

    SpectralCache c;
    c.V = p1.V;
    c.W = p2.V;
    c.lambda1 = p1.lambda;
    c.lambda2 = p2.lambda;
    c.X1 = c.V;
    c.X1inv = c.V.transpose() * G1;
    c.X2 = H2 * c.W;
    c.X2inv = c.W.transpose();
    c.Z1 = G1.llt().solve(G2);
    c.Z2 = H2.llt().solve(H1.transpose()).transpose();  // H1 H2^-1

    const double scale = c.lambda1.cwiseAbs().maxCoeff() + c.lambda2.cwiseAbs().maxCoeff();
    c.kernel.resize(c.lambda1.size(), c.lambda2.size());
    for (Eigen::Index i = 0; i < c.lambda1.size(); ++i)
        for (Eigen::Index j = 0; j < c.lambda2.size(); ++j) {
            const double s = c.lambda1[i] + c.lambda2[j];
            if (std::abs(s) <= 1e-12 * scale)
                throw SolverError("solve_reduced: singular pencil (lambda_i + mu_j ~ 0)");
            c.kernel(i, j) = 1.0 / s;
        }
    return c;
}

/// Reduced (spectral) solve of a two-term equation; `rhs` is the assembled right side.
inline SolveReport solve_reduced(const SylvesterOperator& op, const Matrix& rhs)
{
    const auto t0 = std::chrono::steady_clock::now();
    const SpectralCache cache = build_spectral_cache(op);
    SolveReport r;
    r.solution = cache.solve(rhs);
    r.method = "reduced";
    r.residual_history.push_back((apply(op, r.solution) - rhs).norm());
    r.wall_time = detail::seconds_since(t0);
    return r;
}

/// Eigenvalues of the P1 Dirichlet stiffness matrix: 2N(1 - cos(i pi / N)), i = 1..N-1.
inline Vector dirichlet_stiffness_eigenvalues(int N)
{
    Vector l(N - 1);
    for (int i = 1; i < N; ++i) l[i - 1] = 2.0 * N * (1.0 - std::cos(i * std::numbers::pi / N));
    return l;
}

/// Eigenvalues of Z1 = M^-1 A + (gamma/2) I for P1 Dirichlet.
inline Vector dirichlet_combined_eigenvalues(int N, double gamma)
{
    Vector lA = dirichlet_stiffness_eigenvalues(N);
    Vector l(lA.size());
    for (Eigen::Index i = 0; i < lA.size(); ++i)
        l[i] = ((12.0 * N * N - gamma) * lA[i] + 6.0 * N * gamma) / (12.0 * N - 2.0 * lA[i]);
    return l;
}

/// Sine matrix X_ij = sin(i j pi / N), i, j = 1..N-1; X X^T = (N/2) I.
inline Matrix sine_matrix(int N)
{
    Matrix X(N - 1, N - 1);
    for (int i = 1; i < N; ++i)
        for (int j = 1; j < N; ++j) X(i - 1, j - 1) = std::sin(i * j * std::numbers::pi / N);
    return X;
}

/// Closed-form reduced solve of (A + g/2 M) U M + M U (A + g/2 M) = M F M on
/// the unit square with P1 Dirichlet elements; F holds nodal source values.
inline SolveReport solve_reduced_closed_form(double gamma, const Matrix& F, int N)
{
    if (N < 2) throw DomainError("solve_reduced_closed_form: need N >= 2");
    if (gamma < 0.0) throw DomainError("solve_reduced_closed_form: gamma must be non-negative");
    if (F.rows() != N - 1 || F.cols() != N - 1) throw ShapeError("solve_reduced_closed_form: F must be (N-1)x(N-1)");
    const auto t0 = std::chrono::steady_clock::now();
    const Matrix X = sine_matrix(N);
    const Vector l = dirichlet_combined_eigenvalues(N, gamma);
    const double s = 2.0 / N;  // X^-1 = (2/N) X
    Matrix Fhat = s * (X * F * X);
    for (Eigen::Index i = 0; i < l.size(); ++i)
        for (Eigen::Index j = 0; j < l.size(); ++j) Fhat(i, j) /= l[i] + l[j];
    SolveReport r;
    r.solution = s * (X * Fhat * X);
    r.method = "reduced-closed";
    r.wall_time = detail::seconds_since(t0);
    return r;
}

// ---------------------------------------------------------------------------
// Preconditioners

enum class PreconditionerKind { Identity, EllipticSquare, EllipticXNormal, Parabolic, ParabolicLumped };

inline const char* to_string(PreconditionerKind k)
{
    switch (k) {
    case PreconditionerKind::Identity: return "identity";
    case PreconditionerKind::EllipticSquare: return "square";
    case PreconditionerKind::EllipticXNormal: return "xnormal";
    case PreconditionerKind::Parabolic: return "parabolic";
    case PreconditionerKind::ParabolicLumped: return "parabolic_lumped";
    }
    return "?";
}

/// A factorized 1D matrix supporting in-place solves on vectors.
class Factor1D {
public:
    Factor1D() = default;

    Factor1D(const SparseMatrix& m, std::string name) : name_(std::move(name)), n_(m.rows())
    {
        if (m.rows() != m.cols()) throw ShapeError("Factor1D: matrix '" + name_ + "' is not square");
        if (detail::is_symmetric(m)) {
            ldlt_ = std::make_shared<Ldlt>(m);
            if (ldlt_->info() != Eigen::Success)
                throw FactorizationError("preconditioner factor '" + name_ + "' could not be factorized");
            const Vector d = ldlt_->vectorD().cwiseAbs();
            const double rcond = d.maxCoeff() > 0.0 ? d.minCoeff() / d.maxCoeff() : 0.0;
            if (!(rcond >= 1e-14))
                throw FactorizationError("preconditioner factor '" + name_ + "' is numerically singular (rcond ~ " +
                                         std::to_string(rcond) + ")");
        } else {
            lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>(m);
            if (lu_->info() != Eigen::Success)
                throw FactorizationError("preconditioner factor '" + name_ + "' could not be factorized");
        }
    }

    bool is_identity() const { return !ldlt_ && !lu_; }
    const std::string& name() const { return name_; }

    /// x <- M^-1 x; `tmp` is a scratch vector of the same length.
    void solve_in_place(Vector& x, Vector& tmp) const
    {
        if (ldlt_) {
            tmp = ldlt_->solve(x);
            x.swap(tmp);
        } else if (lu_) {
            tmp = lu_->solve(x);
            x.swap(tmp);
        }
    }

private:
    using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;
    std::string name_ = "I";
    Eigen::Index n_ = 0;
    std::shared_ptr<Ldlt> ldlt_;
    std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

/// P^-1(U) = P_L^-1 U P_R^-1 for a single-term preconditioner P(U) = P_L U P_R.
class Preconditioner {
public:
    Preconditioner() = default;
    Preconditioner(PreconditionerKind kind, SparseMatrix left, SparseMatrix right, std::string left_name,
                   std::string right_name)
        : kind_(kind), left_(std::move(left)), right_(std::move(right))
    {
        if (kind_ != PreconditionerKind::Identity) {
            fl_ = Factor1D(left_, std::move(left_name));
            // U P_R^-1 is solved row by row against P_R^T.
            fr_ = Factor1D(SparseMatrix(right_.transpose()), std::move(right_name));
        }
    }

    static Preconditioner identity() { return {}; }

    PreconditionerKind kind() const { return kind_; }
    const SparseMatrix& left() const { return left_; }
    const SparseMatrix& right() const { return right_; }

    /// In place; scratch use is O(q_x + q_y).
    void apply_inverse_in_place(Matrix& U) const
    {
        if (kind_ == PreconditionerKind::Identity) return;
        if (U.rows() != left_.rows() || U.cols() != right_.rows())
            throw ShapeError("Preconditioner: operand shape mismatch");
        Vector x(U.rows()), tmp(U.rows());
        for (Eigen::Index j = 0; j < U.cols(); ++j) {
            x = U.col(j);
            fl_.solve_in_place(x, tmp);
            U.col(j) = x;
        }
        Vector y(U.cols()), tmpy(U.cols());
        for (Eigen::Index i = 0; i < U.rows(); ++i) {
            y = U.row(i).transpose();
            fr_.solve_in_place(y, tmpy);
            U.row(i) = y.transpose();
        }
    }

    Matrix apply_inverse(const Matrix& U) const
    {
        Matrix r = U;
        apply_inverse_in_place(r);
        return r;
    }

    /// Forward action P(U) = P_L U P_R.
    Matrix apply(const Matrix& U) const
    {
        if (kind_ == PreconditionerKind::Identity) return U;
        return left_ * (U * right_);
    }

private:
    PreconditionerKind kind_ = PreconditionerKind::Identity;
    SparseMatrix left_, right_;
    Factor1D fl_, fr_;
};

struct PreconditionerParams {
    double gamma = 0.0;
    double d_u = 1.0;
    double tau = 0.0;
    bool lumped = false;
};

inline Preconditioner make_preconditioner(PreconditionerKind kind, const DirectionalSets& x, const DirectionalSets& y,
                                          const PreconditionerParams& p)
{
    if (kind == PreconditionerKind::Identity) return Preconditioner::identity();
    const auto& X = x.consistent;
    const auto& Y = y.consistent;
    const double g = p.gamma;
    const double dt = p.d_u * p.tau;
    switch (kind) {
    case PreconditionerKind::EllipticSquare: {
        SparseMatrix L = Y.A, R = X.A;
        if (g > 0.0) {
            L = SparseMatrix(L + g * Y.M);
            R = SparseMatrix(R + g * X.M);
        }
        return {kind, L, R, g > 0.0 ? "A+gM (y)" : "A (y)", g > 0.0 ? "A+gM (x)" : "A (x)"};
    }
    case PreconditionerKind::EllipticXNormal: {
        if (!p.lumped) {
            SparseMatrix L = Y.B1, R = X.A;
            const bool curved = detail::max_abs(Y.M2) >= 1e-15;
            if (curved) R = SparseMatrix(R + X.B2);
            if (g > 0.0) {
                L = SparseMatrix(L + g * Y.M3);
                R = SparseMatrix(R + g * X.M);
            }
            return {kind, L, R, "B1 (y)", curved ? "A+B2 (x)" : "A (x)"};
        }
        const auto& XL = detail::require_lumped(x);
        const auto& YL = detail::require_lumped(y);
        SparseMatrix L = YL.A1, R = X.A;
        const bool curved = detail::max_abs(YL.D2) >= 1e-15;
        if (curved) R = SparseMatrix(R + XL.A2);
        if (g > 0.0) {
            L = SparseMatrix(L + g * SparseMatrix(YL.M0 * YL.D1));
            R = SparseMatrix(R + g * XL.M0);
        }
        return {kind, L, R, "A1 (y)", curved ? "A+A2 (x)" : "A (x)"};
    }
    case PreconditionerKind::Parabolic: {
        const bool curved = detail::max_abs(Y.M2) >= 1e-15;
        SparseMatrix L = Y.M3 + dt * Y.B1;
        SparseMatrix R = X.M + dt * X.A;
        if (curved) R = SparseMatrix(R + dt * X.B2);
        return {kind, L, R, "M3+dtB1 (y)", curved ? "M+dt(A+B2) (x)" : "M+dtA (x)"};
    }
    case PreconditionerKind::ParabolicLumped: {
        const auto& XL = detail::require_lumped(x);
        const auto& YL = detail::require_lumped(y);
        const bool curved = detail::max_abs(YL.D2) >= 1e-15;
        SparseMatrix L = SparseMatrix(YL.M0 * YL.D1) + dt * YL.A1;
        SparseMatrix R = XL.M0 + dt * X.A;
        if (curved) R = SparseMatrix(R + dt * XL.A2);
        return {kind, L, R, "M0D1+dtA1 (y)", curved ? "M0+dt(A+A2) (x)" : "M0+dtA (x)"};
    }
    default: break;
    }
    throw UnsupportedError("make_preconditioner: unknown kind");
}

// ---------------------------------------------------------------------------
// Matrix-oriented PCG

struct StoppingRule {
    enum class Kind { RelativeResidual, Increment, Parabolic };
    Kind kind = Kind::RelativeResidual;
    double value = 1e-10;

    static StoppingRule relative_residual(double tol) { return {Kind::RelativeResidual, tol}; }
    /// Stop once ||U^(s+1) - U^(s)||_F <= threshold.
    static StoppingRule increment(double threshold) { return {Kind::Increment, threshold}; }
    static StoppingRule parabolic(double tau) { return {Kind::Parabolic, tau}; }

    std::string describe() const
    {
        char buf[64];
        const char* name = kind == Kind::RelativeResidual ? "relative_residual" : kind == Kind::Increment ? "increment" : "parabolic";
        std::snprintf(buf, sizeof buf, "%s(%.6g)", name, value);
        return buf;
    }
};

/// Grid-sized dense matrices alive inside mo_pcg: U, R, Z, Q and the caller's rhs.
inline constexpr int mo_pcg_dense_working_set = 5;

using PcgObserver = std::function<void(int iteration, const Matrix& U, double residual_norm)>;

/// Preconditioned CG with grid-matrix iterates. Apart from the caller's rhs
/// the dense working set is U, R, Z, Q; L(Q) is written into Z.
inline SolveReport mo_pcg(const SylvesterOperator& op, const Matrix& rhs, const Preconditioner& P,
                          const StoppingRule& stop, Matrix U0, int max_iter, const PcgObserver& observer = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    if (rhs.rows() != op.rows() || rhs.cols() != op.cols()) throw ShapeError("mo_pcg: rhs shape mismatch");
    if (U0.size() == 0) U0 = Matrix::Zero(rhs.rows(), rhs.cols());
    if (U0.rows() != rhs.rows() || U0.cols() != rhs.cols()) throw ShapeError("mo_pcg: initial guess shape mismatch");
    if (!op.is_symmetric()) throw OperatorError("mo_pcg: operator is not self-adjoint");
    if (max_iter < 0) throw DomainError("mo_pcg: max_iter must be non-negative");

    SolveReport rep;
    rep.method = "mo-pcg";
    Matrix U = std::move(U0);
    Matrix R(rhs.rows(), rhs.cols());
    Vector work;
    apply_into(op, U, R, work);
    R = rhs - R;  // in place: no aliasing between rhs and R

    const double r0 = R.norm();
    rep.residual_history.push_back(r0);
    if (observer) observer(0, U, r0);
    auto finish = [&](StopReason why) {
        rep.stop_reason = why;
        rep.solution = std::move(U);
        rep.wall_time = detail::seconds_since(t0);
        return std::move(rep);
    };
    if (r0 == 0.0) return finish(StopReason::Tolerance);
    const double res_target = stop.kind == StoppingRule::Kind::Increment ? -1.0 : stop.value * r0;

    Matrix Z = R;
    P.apply_inverse_in_place(Z);
    Matrix Q = Z;
    double rz = frobenius_dot(Z, R);

    for (int s = 0; s < max_iter; ++s) {
        apply_into(op, Q, Z, work);  // Z <- L(Q)
        const double qLq = frobenius_dot(Z, Q);
        if (!(qLq > 0.0)) throw OperatorError("mo_pcg: <L(Q), Q> <= 0, operator is not positive definite");
        const double alpha = rz / qLq;
        U.noalias() += alpha * Q;
        R.noalias() -= alpha * Z;
        const double rn = R.norm();
        rep.iterations = s + 1;
        rep.residual_history.push_back(rn);
        if (observer) observer(s + 1, U, rn);
        if (stop.kind == StoppingRule::Kind::Increment) {
            if (std::abs(alpha) * Q.norm() <= stop.value) return finish(StopReason::Increment);
        } else if (rn <= res_target) {
            return finish(StopReason::Tolerance);
        }
        if (rn == 0.0) return finish(StopReason::Tolerance);
        Z = R;
        P.apply_inverse_in_place(Z);
        const double rz_new = frobenius_dot(Z, R);
        const double beta = rz_new / rz;
        rz = rz_new;
        Q = Z + beta * Q;
    }
    return finish(StopReason::MaxIter);
}

// ---------------------------------------------------------------------------
// Kronecker oracle

/// Factorizes to_kronecker(op) once; solves many right-hand sides.
class KroneckerDirectSolver {
public:
    explicit KroneckerDirectSolver(const SylvesterOperator& op) : rows_(op.rows()), cols_(op.cols())
    {
        K_ = to_kronecker(op);
        symmetric_ = op.is_symmetric();
        if (symmetric_) {
            ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(K_);
            if (ldlt_->info() != Eigen::Success) throw FactorizationError("direct: Kronecker matrix factorization failed");
        } else {
            lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>(K_);
            if (lu_->info() != Eigen::Success) throw FactorizationError("direct: Kronecker matrix is singular");
        }
    }

    Matrix solve(const Matrix& rhs) const
    {
        if (rhs.rows() != rows_ || rhs.cols() != cols_) throw ShapeError("direct: rhs shape mismatch");
        const Vector b = vec(rhs);
        const Vector x = symmetric_ ? Vector(ldlt_->solve(b)) : Vector(lu_->solve(b));
        return unvec(x, rows_, cols_);
    }

    const SparseMatrix& matrix() const { return K_; }

private:
    Eigen::Index rows_, cols_;
    SparseMatrix K_;
    bool symmetric_ = false;
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
    std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

inline SolveReport solve_direct(const SylvesterOperator& op, const Matrix& rhs)
{
    const auto t0 = std::chrono::steady_clock::now();
    KroneckerDirectSolver solver(op);
    SolveReport r;
    r.solution = solver.solve(rhs);
    r.method = "direct";
    r.residual_history.push_back((solver.matrix() * vec(r.solution) - vec(rhs)).norm());
    r.wall_time = detail::seconds_since(t0);
    return r;
}

} // namespace mofem

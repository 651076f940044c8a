#include <cmath>
#include <algorithm>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "mofem/fem1d.hpp"
#include "mofem/geometry.hpp"
#include "oracles.hpp"

using namespace mofem;
using oracle::Matrix;

namespace {

Matrix dense(const SparseMatrix& m) { return Matrix(m); }

int bandwidth(const SparseMatrix& m)
{
    int bw = 0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            bw = std::max(bw, static_cast<int>(std::abs(it.row() - it.col())));
    return bw;
}

struct Case {
    int k;
    int N;
    BCKind bc;
};

std::vector<Case> desk_cases()
{
    std::vector<Case> c;
    for (int k = 1; k <= 4; ++k)
        for (int N : {k * 2, k * 4, 12})
            for (BCKind bc : {BCKind::Dirichlet, BCKind::Neumann})
                if (N % k == 0) c.push_back({k, N, bc});
    return c;
}

} // namespace

TEST(BuildBasis, Dimensions)
{
    EXPECT_EQ(build_basis(1, 2, BCKind::Dirichlet).dim(), 1);
    EXPECT_EQ(build_basis(1, 2, BCKind::Neumann).dim(), 3);
    const Basis1D b = build_basis(2, 24, BCKind::Dirichlet);
    EXPECT_EQ(b.element_count(), 12);
    EXPECT_EQ(b.dim(), 23);
}

TEST(BuildBasis, SingleHatPeaksAtMidpoint)
{
    const Basis1D b = build_basis(1, 2, BCKind::Dirichlet);
    EXPECT_DOUBLE_EQ(b.value(0, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(b.value(0, 0.25), 0.5);
    EXPECT_DOUBLE_EQ(b.value(0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(b.value(0, 1.0), 0.0);
}

TEST(BuildBasis, RejectsBadInput)
{
    EXPECT_THROW(build_basis(3, 8, BCKind::Dirichlet), DomainError);
    EXPECT_THROW(build_basis(5, 10, BCKind::Dirichlet), UnsupportedError);
    EXPECT_THROW(build_basis(0, 10, BCKind::Dirichlet), UnsupportedError);
    EXPECT_THROW(build_basis(1, 1, BCKind::Dirichlet), DomainError);
}

TEST(BuildBasis, NodesAreUniform)
{
    const Basis1D b = build_basis(3, 12, BCKind::Neumann);
    for (int m = 0; m <= 12; ++m) EXPECT_DOUBLE_EQ(b.node(m), m / 12.0);
}

TEST(BuildBasis, PartitionOfUnityAndKronecker)
{
    for (int k = 1; k <= 4; ++k) {
        const Basis1D b = build_basis(k, 4 * k, BCKind::Neumann);
        for (int s = 0; s < 200; ++s) {
            const double x = (s + 0.5) / 200.0;
            double sum = 0.0;
            for (int i = 0; i < b.dim(); ++i) sum += b.value(i, x);
            EXPECT_NEAR(sum, 1.0, 1e-13) << "k = " << k << " x = " << x;
        }
        for (int i = 0; i < b.dim(); ++i)
            for (int j = 0; j < b.dim(); ++j)
                EXPECT_NEAR(b.value(i, b.node(j)), i == j ? 1.0 : 0.0, 1e-13);
    }
}

TEST(AssembleStandard, TwoElementsHat)
{
    const auto [A, M] = assemble_standard(build_basis(1, 2, BCKind::Dirichlet));
    ASSERT_EQ(A.rows(), 1);
    EXPECT_NEAR(dense(A)(0, 0), 4.0, 1e-14);
    EXPECT_NEAR(dense(M)(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(AssembleStandard, FourElementsTridiagonal)
{
    const auto [A, M] = assemble_standard(build_basis(1, 4, BCKind::Dirichlet));
    Matrix T(3, 3), S(3, 3);
    T << 2, -1, 0, -1, 2, -1, 0, -1, 2;
    S << 4, 1, 0, 1, 4, 1, 0, 1, 4;
    EXPECT_LT((dense(A) - 4.0 * T).norm(), 1e-13);
    EXPECT_LT((dense(M) - S / 24.0).norm(), 1e-15);
}

TEST(AssembleStandard, MassIsAffineInStiffness)
{
    for (int N : {2, 5, 16, 40}) {
        const auto [A, M] = assemble_standard(build_basis(1, N, BCKind::Dirichlet));
        const double alpha = -1.0 / (6.0 * N * N), beta = 1.0 / N;
        const Matrix rhs = alpha * dense(A) + beta * Matrix::Identity(N - 1, N - 1);
        EXPECT_LT((dense(M) - rhs).norm(), 1e-13 * dense(M).norm()) << "N = " << N;
    }
}

TEST(AssembleStandard, StiffnessEigenvalues)
{
    // 2N(1 - cos(i pi / N)); with 2/N the N = 2 case would give 1 instead of A = [4].
    for (int N : {2, 4, 8, 16, 32}) {
        const auto [A, M] = assemble_standard(build_basis(1, N, BCKind::Dirichlet));
        Eigen::SelfAdjointEigenSolver<Matrix> es(dense(A));
        for (int i = 1; i < N; ++i)
            EXPECT_NEAR(es.eigenvalues()[i - 1], 2.0 * N * (1.0 - std::cos(i * std::numbers::pi / N)), 1e-10);
    }
}

TEST(AssembleStandard, NeumannStiffnessKernel)
{
    for (int k = 1; k <= 4; ++k) {
        const auto [A, M] = assemble_standard(build_basis(k, 4 * k, BCKind::Neumann));
        const Matrix Ad = dense(A);
        EXPECT_LT(Ad.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(Ad);
        EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-10);
        EXPECT_GT(es.eigenvalues()[1], 1e-3);
    }
}

TEST(AssembleWeighted, UnitProfileDegenerates)
{
    for (const auto& c : desk_cases()) {
        const Basis1D b = build_basis(c.k, c.N, c.bc);
        const auto s = assemble_weighted(b, unit_profile());
        EXPECT_LT((dense(s.M1) - dense(s.M)).norm(), 1e-13);
        EXPECT_LT((dense(s.M3) - dense(s.M)).norm(), 1e-13);
        EXPECT_LT((dense(s.B1) - dense(s.A)).norm(), 1e-13 * dense(s.A).norm());
        EXPECT_LT(dense(s.M2).norm(), 1e-13);
        EXPECT_LT(dense(s.C2).norm(), 1e-13);
    }
}

TEST(AssembleWeighted, B2OnTwoElements)
{
    const auto s = assemble_weighted(build_basis(1, 2, BCKind::Dirichlet), cap_profile());
    EXPECT_NEAR(dense(s.B2)(0, 0), 4.0 / 3.0, 1e-14);
}

TEST(AssembleWeighted, C1EntryAgainstOracle)
{
    const auto s = assemble_weighted(build_basis(1, 4, BCKind::Dirichlet), cap_profile());
    const Matrix ref = oracle::weighted_1d(1, 4, true, 0.0, [](double x) { return x; }, 1, 0);
    EXPECT_NEAR(dense(s.C1)(0, 1), ref(0, 1), 1e-14);
    // psi_1' = -4, psi_2 = 4(x - 1/4) on [1/4, 1/2]: -16 * int (x^2 - x/4) dx = -5/24.
    EXPECT_NEAR(dense(s.C1)(0, 1), -5.0 / 24.0, 1e-14);
}

namespace {

// points = 0: the oracle's default high-order rule; otherwise the given rule size.
double max_oracle_gap(const ProfileFn& prof, const Case& c, int points, bool smooth_only)
{
    const Basis1D b = build_basis(c.k, c.N, c.bc);
    const Basis1D bx = build_basis(c.k, c.N, c.bc, -0.5);
    const bool dir = c.bc == BCKind::Dirichlet;
    const auto s = assemble_weighted(b, prof);
    const auto sx = assemble_weighted(bx, prof);
    auto L = prof.value;
    auto dL = prof.derivative;
    auto one = [](double) { return 1.0; };
    auto ref = [&](double x0, const std::function<double(double)>& w, int p, int r) {
        return points ? oracle::weighted_1d(c.k, c.N, dir, x0, w, p, r, points)
                      : oracle::weighted_1d(c.k, c.N, dir, x0, w, p, r);
    };
    double gap = 0.0;
    // Floor on the scale: C2 is numerically zero for symmetric profiles on the coarsest meshes.
    auto chk = [&](const SparseMatrix& got, const Matrix& want) {
        gap = std::max(gap, (dense(got) - want).norm() / std::max(want.norm(), 1e-3));
    };
    chk(s.M1, ref(0.0, [&](double y) { return 1.0 / L(y); }, 0, 0));
    chk(s.M2, ref(0.0, [&](double y) { return dL(y) * dL(y) / L(y); }, 0, 0));
    if (smooth_only && prof.name == "cap") return gap;
    chk(s.B1, ref(0.0, L, 1, 1));
    chk(s.M3, ref(0.0, L, 0, 0));
    chk(s.C2, ref(0.0, dL, 1, 0));
    if (smooth_only) return gap;
    chk(s.A, ref(0.0, one, 1, 1));
    chk(s.M, ref(0.0, one, 0, 0));
    chk(sx.B2, ref(-0.5, [](double x) { return x * x; }, 1, 1));
    chk(sx.C1, ref(-0.5, [](double x) { return x; }, 1, 0));
    return gap;
}

std::string label(const Case& c, const ProfileFn& p)
{
    return "k=" + std::to_string(c.k) + " N=" + std::to_string(c.N) + " " + to_string(c.bc) + " " + p.name;
}

} // namespace

TEST(AssembleWeighted, PolynomialWeightsAreExact)
{
    // Cap weights L, L', x, x^2 are low-degree polynomials, so the basis rule integrates them exactly.
    for (const auto& c : desk_cases()) {
        const Basis1D b = build_basis(c.k, c.N, c.bc);
        const Basis1D bx = build_basis(c.k, c.N, c.bc, -0.5);
        const bool dir = c.bc == BCKind::Dirichlet;
        const auto s = assemble_weighted(b, cap_profile());
        const auto sx = assemble_weighted(bx, cap_profile());
        auto L = cap_profile().value;
        auto dL = cap_profile().derivative;
        auto one = [](double) { return 1.0; };
        const std::string at = label(c, cap_profile());
        EXPECT_LT(oracle::rel_diff(dense(s.A), oracle::weighted_1d(c.k, c.N, dir, 0.0, one, 1, 1)), 1e-13) << at;
        EXPECT_LT(oracle::rel_diff(dense(s.M), oracle::weighted_1d(c.k, c.N, dir, 0.0, one, 0, 0)), 1e-13) << at;
        EXPECT_LT(oracle::rel_diff(dense(s.B1), oracle::weighted_1d(c.k, c.N, dir, 0.0, L, 1, 1)), 1e-13) << at;
        EXPECT_LT(oracle::rel_diff(dense(s.M3), oracle::weighted_1d(c.k, c.N, dir, 0.0, L, 0, 0)), 1e-13) << at;
        EXPECT_LT(oracle::rel_diff(dense(s.C2), oracle::weighted_1d(c.k, c.N, dir, 0.0, dL, 1, 0)), 1e-13) << at;
        EXPECT_LT(oracle::rel_diff(dense(sx.B2),
                                   oracle::weighted_1d(c.k, c.N, dir, -0.5, [](double x) { return x * x; }, 1, 1)),
                  1e-13)
            << at;
        EXPECT_LT(
            oracle::rel_diff(dense(sx.C1), oracle::weighted_1d(c.k, c.N, dir, -0.5, [](double x) { return x; }, 1, 0)),
            1e-13)
            << at;
    }
}

TEST(AssembleWeighted, MatchesOracleWithSameRule)
{
    // Same Gauss rule in both: any gap is an assembly error, not a quadrature one.
    for (const ProfileFn& prof : {cap_profile(), jar_profile()})
        for (const auto& c : desk_cases())
            EXPECT_LT(max_oracle_gap(prof, c, std::max(c.k + 3, 5), false), 1e-13) << label(c, prof);
}

TEST(AssembleWeighted, QuadratureErrorDecaysForSmoothWeights)
{
    for (const ProfileFn& prof : {cap_profile(), jar_profile()})
        for (int k = 1; k <= 4; ++k) {
            const Case coarse{k, 24, BCKind::Dirichlet}, fine{k, 96, BCKind::Dirichlet};
            const double e0 = max_oracle_gap(prof, coarse, 0, true);
            const double e1 = max_oracle_gap(prof, fine, 0, true);
            EXPECT_LT(e1, 1e-7) << label(fine, prof);
            // Well above h^4 on a 4x refinement; the floor covers rounding once e1 is tiny.
            EXPECT_LT(e1, e0 / 100.0 + 1e-13) << label(fine, prof);
        }
}

TEST(AssembleWeighted, SymmetryDefinitenessBandwidth)
{
    for (const auto& c : desk_cases()) {
        const auto s = assemble_weighted(build_basis(c.k, c.N, c.bc, -0.5), jar_profile());
        for (const SparseMatrix* m : {&s.A, &s.M, &s.B1, &s.B2, &s.M1, &s.M2, &s.M3}) {
            const Matrix d = dense(*m);
            EXPECT_LT((d - d.transpose()).norm(), 1e-13 * std::max(1.0, d.norm()));
        }
        for (const SparseMatrix* m : {&s.A, &s.M, &s.B1, &s.B2, &s.C1, &s.C2, &s.M1, &s.M2, &s.M3})
            EXPECT_LE(bandwidth(*m), c.k);  // half-bandwidth k, i.e. 2k+1 diagonals
        for (const SparseMatrix* m : {&s.M, &s.M1, &s.M3}) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(dense(*m));
            EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        }
        if (c.bc == BCKind::Dirichlet) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(dense(s.A));
            EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
        }
    }
}

TEST(AssembleLumped, DirichletConstantMass)
{
    const auto l = assemble_lumped(build_basis(1, 4, BCKind::Dirichlet), cap_profile());
    EXPECT_LT((dense(l.M0) - 0.25 * Matrix::Identity(3, 3)).norm(), 1e-15);
    for (int N : {3, 10, 33}) {
        const auto m = assemble_lumped(build_basis(1, N, BCKind::Dirichlet), jar_profile());
        EXPECT_LT((dense(m.M0) - Matrix::Identity(N - 1, N - 1) / N).norm(), 1e-15);
    }
}

TEST(AssembleLumped, ConvectionIsSkewWithHalfEntries)
{
    const auto l = assemble_lumped(build_basis(1, 4, BCKind::Dirichlet), unit_profile());
    Matrix C(3, 3);
    C << 0, -0.5, 0, 0.5, 0, -0.5, 0, 0.5, 0;
    // Row i holds int psi_i' psi_j: superdiagonal -1/2, subdiagonal +1/2.
    EXPECT_LT((dense(l.C) - C).norm(), 1e-15);
    EXPECT_LT((dense(l.C) + dense(l.C).transpose()).norm(), 1e-15);
    const auto j = assemble_lumped(build_basis(1, 9, BCKind::Dirichlet), jar_profile());
    EXPECT_LT((dense(j.C) + dense(j.C).transpose()).norm(), 1e-15);
    EXPECT_LT(oracle::rel_diff(dense(j.C), oracle::weighted_1d(1, 9, true, 0.0, [](double) { return 1.0; }, 1, 0)),
              1e-14);
}

TEST(AssembleLumped, NodalDiagonals)
{
    const auto unit = assemble_lumped(build_basis(1, 6, BCKind::Dirichlet), unit_profile());
    EXPECT_LT((dense(unit.D1) - Matrix::Identity(5, 5)).norm(), 1e-15);
    EXPECT_LT(dense(unit.D2).norm(), 1e-15);

    const Basis1D b = build_basis(1, 6, BCKind::Neumann, -0.5);
    const Basis1D by = build_basis(1, 6, BCKind::Neumann);
    const auto x = assemble_lumped(b, cap_profile());
    const auto y = assemble_lumped(by, cap_profile());
    for (int i = 0; i < 7; ++i) {
        EXPECT_DOUBLE_EQ(dense(x.D3)(i, i), -0.5 + i / 6.0);
        EXPECT_DOUBLE_EQ(dense(y.D1)(i, i), cap_profile().value(i / 6.0));
        EXPECT_DOUBLE_EQ(dense(y.D2)(i, i), cap_profile().derivative(i / 6.0));
    }
    // Row-sum lumping of the consistent mass.
    const auto [A, M] = assemble_standard(by);
    EXPECT_LT((dense(y.M0).diagonal() - dense(M).rowwise().sum()).norm(), 1e-15);
}

TEST(AssembleLumped, StiffnessWithUnitWeightIsStandard)
{
    const Basis1D b = build_basis(1, 8, BCKind::Dirichlet);
    const auto l = assemble_lumped(b, unit_profile());
    const auto [A, M] = assemble_standard(b);
    EXPECT_LT((dense(l.A1) - dense(A)).norm(), 1e-12);
}

TEST(AssembleLumped, OnlyLinearElements)
{
    EXPECT_THROW(assemble_lumped(build_basis(2, 8, BCKind::Dirichlet), cap_profile()), UnsupportedError);
}

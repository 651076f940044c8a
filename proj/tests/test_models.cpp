#include <cmath>
#include <complex>
#include <cstdint>

#include <gtest/gtest.h>

#include "mofem/models.hpp"
#include "oracles.hpp"

using namespace mofem;

TEST(Kinetics, WorkedValues)
{
    const DIBParams p = dib_presets("spots_worms");
    // 10 - 30 + 25 * 0.5
    EXPECT_NEAR(dib_kinetics(1.0, 0.0, p).first, -7.5, 1e-14);
    const DIBParams h = dib_presets("holes");
    // 3 * 0.5 * 0.9 - 3.2727 * 0.5 * 1.1
    EXPECT_NEAR(dib_kinetics(0.0, 0.5, h).second, 1.35 - 3.2727 * 0.55, 1e-14);
    EXPECT_NEAR(dib_kinetics(0.0, 0.5, h).second, -0.45, 1e-4);
}

TEST(Kinetics, ReducesAtZeroEta)
{
    const DIBParams p;
    for (double th : {0.0, 0.25, 0.5, 0.9})
        EXPECT_NEAR(dib_kinetics(0.0, th, p).first, -p.B * (th - p.alpha), 1e-14);
}

TEST(Kinetics, MatchesExpandedPolynomial)
{
    for (const char* name : {"spots_worms", "holes"}) {
        const DIBParams p = dib_presets(name);
        const double c1 = 1.0 - p.gamma_k;
        for (double e : {-1.3, -0.2, 0.0, 0.7, 2.0})
            for (double t : {-0.5, 0.0, 0.3, 1.0, 1.7}) {
                // f and g multiplied out into monomials in eta and theta.
                const double f = p.A1 * e - p.A1 * e * t - p.A2 * e * e * e - p.B * t + p.B * p.alpha;
                const double g = p.C * (c1 + (p.gamma_k - c1) * t - p.gamma_k * t * t) +
                                 p.C * p.k2 * (c1 * e + (p.gamma_k - c1) * e * t - p.gamma_k * e * t * t) -
                                 p.D * (t + p.gamma_k * t * t + p.k3 * e * t + p.k3 * p.gamma_k * e * t * t);
                const auto [fv, gv] = dib_kinetics(e, t, p);
                EXPECT_NEAR(fv, f, 1e-14 * std::max(1.0, std::abs(f)) * 10);
                EXPECT_NEAR(gv, g, 1e-14 * std::max(1.0, std::abs(g)) * 10);
            }
    }
}

TEST(Kinetics, MatrixFormIsEntrywise)
{
    const DIBParams p;
    Eigen::MatrixXd E(2, 3), T(2, 3), F, G;
    E << 0.1, -0.2, 0.3, 0.0, 1.0, 0.5;
    T << 0.5, 0.4, 0.6, 0.0, 1.0, 0.2;
    dib_kinetics(E, T, p, F, G);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) {
            const auto [f, g] = dib_kinetics(E(i, j), T(i, j), p);
            EXPECT_EQ(F(i, j), f);
            EXPECT_EQ(G(i, j), g);
        }
    EXPECT_THROW(dib_kinetics(E, Eigen::MatrixXd(3, 2), p, F, G), ShapeError);
}

TEST(Presets, Values)
{
    const DIBParams s = dib_presets("spots_worms");
    EXPECT_EQ(s.A2, 30.0);
    EXPECT_EQ(s.B, 25.0);
    EXPECT_EQ(s.C, 7.0);
    EXPECT_EQ(s.D, 3.2727);
    EXPECT_EQ(s.d_theta, 20.0);
    const DIBParams h = dib_presets("holes");
    EXPECT_EQ(h.A2, 1.0);
    EXPECT_EQ(h.B, 30.0);
    EXPECT_EQ(h.C, 3.0);
    EXPECT_EQ(h.A1, s.A1);
    EXPECT_THROW(dib_presets("stripes"), DomainError);
}

TEST(Presets, Validation)
{
    DIBParams p;
    EXPECT_NO_THROW(p.validate());
    p.alpha = 1.0;
    EXPECT_THROW(p.validate(), DomainError);
    p = {};
    p.rho = 0.0;
    EXPECT_THROW(p.validate(), DomainError);
    p = {};
    p.C = std::nan("");
    EXPECT_THROW(p.validate(), DomainError);
}

TEST(LinearAnalysis, PresetEquilibriumIsNotTheInitialLevel)
{
    // g(0, 1/2) != 0 for the preset values, so Newton moves away from (0, 1/2).
    const DIBParams p;
    EXPECT_GT(std::abs(dib_kinetics(0.0, 0.5, p).second), 1.0);
    const auto a = dib_linear_analysis(p, 0.0, 0.5);
    ASSERT_TRUE(a.converged);
    const auto [f, g] = dib_kinetics(a.eta, a.theta, p);
    EXPECT_LT(std::hypot(f, g), 1e-10);
    EXPECT_GT(std::hypot(a.eta, a.theta - 0.5), 1e-2);
}

TEST(LinearAnalysis, MatchesHandDerivedDispersion)
{
    // With D = 9C/11 the point (0, 1/2) is an equilibrium; Jacobian written out by hand.
    DIBParams p;
    p.D = 9.0 * p.C / 11.0;
    const auto a = dib_linear_analysis(p, 0.0, 0.5);
    ASSERT_TRUE(a.converged);
    EXPECT_NEAR(a.eta, 0.0, 1e-10);
    EXPECT_NEAR(a.theta, 0.5, 1e-10);

    const double th = 0.5, gk = p.gamma_k;
    const double fe = p.A1 * (1 - th), ft = -p.B;
    const double ge = p.C * p.k2 * (1 - th) * (1 - gk * (1 - th)) - p.D * th * (1 + gk * th) * p.k3;
    const double gt = p.C * (-(1 - gk * (1 - th)) + gk * (1 - th)) - p.D * (1 + 2 * gk * th);
    auto growth = [&](double k2) {
        const double a11 = fe - k2, a22 = gt - p.d_theta * k2;
        const double tr = a11 + a22, det = a11 * a22 - ft * ge;
        const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4 * det));
        return std::max((tr + disc.real()) / 2, (tr - disc.real()) / 2);
    };
    EXPECT_NEAR(a.growth_at_zero, growth(0.0), 1e-5);
    double best = growth(0.0), best_k2 = 0.0;
    for (int i = 1; i <= 200000; ++i) {
        const double k2 = 50.0 * i / 200000;
        if (growth(k2) > best) {
            best = growth(k2);
            best_k2 = k2;
        }
    }
    EXPECT_NEAR(a.max_growth, best, 1e-4);
    EXPECT_NEAR(a.k2_star, best_k2, 0.01);
    EXPECT_EQ(a.turing_unstable(), best > 0.0 && growth(0.0) < 0.0);
}

TEST(Manufactured, Names)
{
    for (const auto& n : manufactured_problem_names()) EXPECT_EQ(manufactured_problem(n).name, n);
    EXPECT_THROW(manufactured_problem("poisson_disk"), DomainError);
}

TEST(Manufactured, SourcesMatchFiniteDifferences)
{
    for (const auto& n : manufactured_problem_names()) {
        const auto p = manufactured_problem(n);
        const double t = p.time_dependent ? 0.4 : 0.0;
        for (double xr : {0.2, 0.5, 0.77})
            for (double y : {0.15, 0.5, 0.85}) {
                const double x = (xr + p.domain.x_origin()) * p.domain.L(y);
                const double lap = oracle::fd_laplacian([&](double a, double b) { return p.exact(a, b, t); }, x, y);
                double want = -p.d_u * lap + p.gamma * p.exact(x, y, t);
                if (p.time_dependent) {
                    const double h = 1e-4;
                    want += (p.exact(x, y, t + h) - p.exact(x, y, t - h)) / (2 * h);
                }
                EXPECT_NEAR(p.source(x, y, t), want, 1e-6 * std::max(1.0, std::abs(want))) << n;
            }
    }
}

TEST(Manufactured, DirichletDataVanishOnTheBoundary)
{
    for (const char* n : {"poisson_square", "poisson_cap", "heat_cap"}) {
        const auto p = manufactured_problem(n);
        for (int s = 0; s <= 20; ++s) {
            const double r = s / 20.0;
            for (const auto& [xr, y] : {std::pair{0.0, r}, std::pair{1.0, r}, std::pair{r, 0.0}, std::pair{r, 1.0}}) {
                const double x = (xr + p.domain.x_origin()) * p.domain.L(y);
                EXPECT_NEAR(p.exact(x, y, 0.3), 0.0, 1e-14) << n;
            }
        }
    }
}

TEST(Manufactured, ReactionConstantIsOne)
{
    const auto p = manufactured_problem("reaction_constant");
    EXPECT_EQ(p.bc, BCKind::Neumann);
    EXPECT_EQ(p.exact(0.3, 0.4, 0.0), 1.0);
    EXPECT_EQ(p.source(0.3, 0.4, 0.0), p.gamma);
}

TEST(Random, SplitMixReferenceValue)
{
    SplitMix64 g(0);
    EXPECT_EQ(g.next(), 0xE220A8397B1DCDAFULL);
    SplitMix64 a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
    SplitMix64 u(7);
    for (int i = 0; i < 10000; ++i) {
        const double v = u.uniform();
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(InitialFields, DeterministicAndBounded)
{
    InitialData d;
    d.amplitude = 1e-2;
    d.seed = 99;
    const auto [e1, t1] = initial_fields(5, 7, d);
    const auto [e2, t2] = initial_fields(5, 7, d);
    EXPECT_EQ(e1, e2);
    EXPECT_EQ(t1, t2);
    EXPECT_GE(e1.minCoeff(), d.eta_e);
    EXPECT_LT(e1.maxCoeff(), d.eta_e + d.amplitude);
    EXPECT_GE(t1.minCoeff(), d.theta_e);
    EXPECT_LT(t1.maxCoeff(), d.theta_e + d.amplitude);
    EXPECT_NE(e1 - Eigen::MatrixXd::Constant(5, 7, d.eta_e), t1 - Eigen::MatrixXd::Constant(5, 7, d.theta_e));
    d.seed = 100;
    EXPECT_NE(initial_fields(5, 7, d).first, e1);
}

TEST(InitialFields, ColumnMajorDraws)
{
    InitialData d;
    d.amplitude = 1.0;
    d.eta_e = 0.0;
    d.seed = 5;
    const auto eta = initial_fields(3, 2, d).first;
    SplitMix64 g(5);
    for (int c = 0; c < 2; ++c)
        for (int r = 0; r < 3; ++r) EXPECT_EQ(eta(r, c), g.uniform());
}

TEST(InitialFields, ZeroAmplitudeIsConstant)
{
    InitialData d;
    d.amplitude = 0.0;
    const auto [e, t] = initial_fields(4, 4, d);
    EXPECT_EQ(e, Eigen::MatrixXd::Constant(4, 4, 0.0));
    EXPECT_EQ(t, Eigen::MatrixXd::Constant(4, 4, 0.5));
    EXPECT_THROW(initial_fields(0, 4, d), DomainError);
}

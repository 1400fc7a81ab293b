#include <milne/profiles.hpp>
#include <milne/solver.hpp>
#include <milne/study.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace milne;

namespace {

IncomingData random_incoming(const Grid& g, unsigned seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    IncomingData d = IncomingData::constant(g, 0.0, 0.0);
    for (double& v : d.at_inlet) v = u(rng);
    for (double& v : d.at_outlet) v = u(rng);
    return d;
}

double max_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.values().size(); ++k) m = std::max(m, std::abs(a.values()[k] - b.values()[k]));
    return m;
}

double max_abs(const Field& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

SolverConfig with_preconditioner(Preconditioner p) {
    SolverConfig c;
    c.preconditioner = p;
    return c;
}

const EquationKind kKinds[] = {EquationKind::classical(), EquationKind::milne(0.1)};
const Preconditioner kPreconditioners[] = {Preconditioner::Sweep, Preconditioner::Jacobi, Preconditioner::None};

}  // namespace

TEST(SolveBvp, ConstantDataGivesConstantField) {
    const Grid g = make_grid(6, 30, 32);
    for (const auto& kind : kKinds) {
        for (auto p : kPreconditioners) {
            const Field f = solve_bvp({kind, g, IncomingData::constant(g, 0.7, 0.7)}, with_preconditioner(p));
            for (double v : f.values()) EXPECT_NEAR(v, 0.7, 1e-9);
        }
    }
}

TEST(SolveBvp, MatchesDenseOracleOnCoarseGrids) {
    const Grid g = make_grid(3, 20, 16);
    unsigned seed = 100;
    for (const auto& kind : kKinds) {
        for (int rep = 0; rep < 3; ++rep) {
            const HalfSpaceProblem problem{kind, g, random_incoming(g, seed++)};
            const Field oracle = dense_oracle_solve(problem);
            for (auto p : kPreconditioners) {
                const Field f = solve_bvp(problem, with_preconditioner(p));
                EXPECT_LE(max_abs_diff(f, oracle), 1e-8 * (1 + max_abs(oracle)));
            }
        }
    }
}

TEST(SolveBvp, ResidualMeetsTolerance) {
    const Grid g = make_grid(6, 60, 64);
    for (const auto& kind : kKinds) {
        const IncomingData d = random_incoming(g, 5);
        const SolveOutput out = solve_bvp_detailed({kind, g, d}, SolverConfig{});
        const Field r = apply_operator(kind, out.f, d);
        const std::vector<double> b = boundary_rhs(g, d);
        double rn = 0.0, bn = 0.0;
        for (double v : r.values()) rn += v * v;
        for (double v : b) bn += v * v;
        EXPECT_LE(std::sqrt(rn), 1e-10 * std::sqrt(bn) * (1 + 1e-6));
        EXPECT_NEAR(out.stats.relative_residual, std::sqrt(rn / bn), 1e-12);
    }
}

TEST(SolveBvp, MilneAtSmallEpsConvergesQuickly) {
    // Regression baseline for the iteration count at the finest mesh of the default sweep.
    const double eps = 1.0 / 25;
    const Grid g = make_grid_for_spacing(6, eps);
    Shooter s(EquationKind::milne(eps), g, SolverConfig{});
    const MatchedSolution sol = s.shoot_unchecked(s.sample_inlet(profiles::cosine()));
    EXPECT_GT(sol.f1_stats.iterations, 0u);
    EXPECT_LE(sol.f1_stats.iterations, 60u);
    EXPECT_LE(sol.f1_stats.relative_residual, 1e-10);
}

TEST(SolveBvp, IterationCapRaisesNonConvergence) {
    const Grid g = make_grid(6, 30, 32);
    SolverConfig c;
    c.max_iters = 2;
    c.krylov_tol = 1e-14;
    for (auto p : kPreconditioners) {
        c.preconditioner = p;
        try {
            solve_bvp({EquationKind::classical(), g, random_incoming(g, 9)}, c);
            FAIL() << "expected NonConvergence";
        } catch (const NonConvergence& e) {
            EXPECT_EQ(e.iterations, 2u);
            EXPECT_GT(e.residual, 1e-14);
        }
    }
}

TEST(SolveBvp, RejectsBadConfig) {
    const Grid g = make_grid(1, 2, 4);
    SolverConfig c;
    c.krylov_tol = 1.0;
    EXPECT_THROW(solve_bvp({EquationKind::classical(), g, IncomingData::constant(g, 0, 0)}, c), InvalidArgument);
    c = {};
    c.r_growth = 1.0;
    EXPECT_THROW(c.validate(), InvalidArgument);
    EXPECT_THROW(solve_bvp({EquationKind::classical(), g, IncomingData::constant(make_grid(1, 2, 8), 0, 0)}, {}),
                 GridMismatch);
}

TEST(SolveBvp, LinearInTheData) {
    const Grid g = make_grid(4, 40, 40);
    for (const auto& kind : kKinds) {
        const IncomingData d1 = random_incoming(g, 21), d2 = random_incoming(g, 22);
        IncomingData mix = d1;
        for (std::size_t k = 0; k < mix.at_inlet.size(); ++k) {
            mix.at_inlet[k] = 2 * d1.at_inlet[k] - 0.5 * d2.at_inlet[k];
            mix.at_outlet[k] = 2 * d1.at_outlet[k] - 0.5 * d2.at_outlet[k];
        }
        const SolverConfig c;
        const Field lhs = solve_bvp({kind, g, mix}, c);
        const Field rhs = combine(2, solve_bvp({kind, g, d1}, c), -0.5, solve_bvp({kind, g, d2}, c));
        EXPECT_LE(max_abs_diff(lhs, rhs), 10 * c.krylov_tol * (1 + max_abs(lhs)));
    }
}

TEST(SolveBvp, DiscreteMaximumPrinciple) {
    const Grid g = make_grid(6, 50, 48);
    const SolverConfig c;
    for (unsigned seed = 0; seed < 8; ++seed) {
        const IncomingData d = random_incoming(g, 300 + seed, 0.2, 0.9);
        double lo = 1e300, hi = -1e300;
        for (double v : d.at_inlet) lo = std::min(lo, v), hi = std::max(hi, v);
        for (double v : d.at_outlet) lo = std::min(lo, v), hi = std::max(hi, v);
        const Field f = solve_bvp({EquationKind::classical(), g, d}, c);
        const double tol = 10 * c.krylov_tol * (hi - lo + 1);
        for (double v : f.values()) {
            EXPECT_GE(v, lo - tol);
            EXPECT_LE(v, hi + tol);
        }
    }
}

TEST(DenseOracle, ConstantDataAndGuards) {
    const Grid g = make_grid(2, 6, 8);
    const Field f = dense_oracle_solve({EquationKind::milne(0.3), g, IncomingData::constant(g, 0.25, 0.25)});
    for (double v : f.values()) EXPECT_NEAR(v, 0.25, 1e-13);
    EXPECT_THROW(dense_oracle_solve({EquationKind::classical(), make_grid(6, 200, 200), IncomingData::constant(
                                         make_grid(6, 200, 200), 0, 0)}),
                 SizeGuard);
}

TEST(DenseOracle, ProbedMatrixHasIdentityDirichletRows) {
    const Grid g = make_grid(2, 4, 8);
    const TransportOperator op(EquationKind::milne(0.2), g);
    const std::size_t n = op.size();
    std::vector<double> unit(n, 0.0), col(n);
    for (std::size_t c = 0; c < n; ++c) {
        unit[c] = 1.0;
        op.apply(unit, col);
        unit[c] = 0.0;
        for (std::size_t i = 0; i < g.eta_count(); ++i) {
            for (std::size_t j = 0; j < g.n_theta(); ++j) {
                if (!op.is_dirichlet(i, j)) continue;
                EXPECT_EQ(col[g.index(i, j)], g.index(i, j) == c ? 1.0 : 0.0);
            }
        }
    }
}

TEST(DoubleShoot, ConstantDataIsExactEndState) {
    const Grid g = make_grid(6, 60, 64);
    for (const auto& kind : kKinds) {
        for (double c : {0.0, 0.7, 1.0}) {
            Shooter s(kind, g, SolverConfig{});
            const MatchedSolution sol = s.shoot(std::vector<double>(g.n_theta() / 2, c));
            EXPECT_NEAR(sol.lam, c, 1e-9);
            EXPECT_LE(sol.constancy_residual, 1e-9);
            for (double v : sol.f.values()) EXPECT_NEAR(v, c, 1e-9);
            EXPECT_NEAR(end_state(sol), c, 1e-9);
            if (c > 0) {
                // Each shot alone relaxes below its data.
                EXPECT_LT(sol.f1.at(g.n_eta(), g.n_theta() - 1), c);
                EXPECT_LT(sol.f2.at(g.n_eta(), g.n_theta() - 1), 1.0);
            }
        }
    }
}

TEST(DoubleShoot, LambdaIsTraceAverageOfTheRatio) {
    const Grid g = make_grid(6, 60, 64);
    Shooter s(EquationKind::milne(0.1), g, SolverConfig{});
    const MatchedSolution sol = s.shoot_unchecked(s.sample_inlet(profiles::cosine()));
    double sum = 0.0, residual = 0.0;
    for (std::size_t j = g.first_positive(); j < g.n_theta(); ++j) {
        sum += sol.f1.at(g.n_eta(), j) / (1 - sol.f2.at(g.n_eta(), j));
    }
    EXPECT_NEAR(sol.lam, sum / (g.n_theta() / 2), 1e-15);
    for (std::size_t j = 0; j < g.n_theta(); ++j) residual = std::max(residual, std::abs(sol.f.at(g.n_eta(), j) - sol.lam));
    EXPECT_EQ(sol.constancy_residual, residual);
    EXPECT_EQ(max_abs_diff(sol.f, combine(1, sol.f1, sol.lam, sol.f2)), 0.0);
}

TEST(DoubleShoot, ConstantTracesGiveClosedForm) {
    // With constant data both traces are flat, so lam = a / (1 - b) node by node.
    const Grid g = make_grid(6, 60, 64);
    Shooter s(EquationKind::classical(), g, SolverConfig{});
    const MatchedSolution sol = s.shoot(std::vector<double>(g.n_theta() / 2, 0.4));
    const std::size_t j = g.n_theta() - 3;
    const double a = sol.f1.at(g.n_eta(), j), b = sol.f2.at(g.n_eta(), j);
    EXPECT_NEAR(sol.lam, a / (1 - b), 1e-9);
}

TEST(DoubleShoot, SmoothDataMatchedAtDepthSix) {
    const Grid g = make_grid_for_spacing(6, 0.04);
    Shooter s(EquationKind::classical(), g, SolverConfig{});
    const MatchedSolution sol = s.shoot(s.sample_inlet(profiles::cosine()));
    EXPECT_LE(sol.constancy_residual, 1e-3);
    EXPECT_GT(sol.lam, 0.0);
    EXPECT_LT(sol.lam, 1.0);
}

TEST(DoubleShoot, ShallowStripSignalsDomainTooSmallAndRetryRecovers) {
    const Grid g = make_grid_for_spacing(1.5, 0.05);
    SolverConfig c;
    c.r_growth = 2.0;
    Shooter s(EquationKind::classical(), g, c);
    try {
        s.shoot(s.sample_inlet(profiles::cosine()));
        FAIL() << "expected DomainTooSmall";
    } catch (const DomainTooSmall& e) {
        EXPECT_GT(e.residual, c.lambda_const_tol);
    }
    const MatchedSolution sol = double_shoot_with_retry(EquationKind::classical(), profiles::cosine(), g, c);
    EXPECT_GT(sol.f.grid().depth(), 1.5);
    EXPECT_LE(sol.constancy_residual, c.lambda_const_tol);
    EXPECT_NEAR(sol.f.grid().d_eta(), g.d_eta(), 1e-12);
    EXPECT_THROW(double_shoot_with_retry(EquationKind::classical(), profiles::cosine(), g, c, 1), DomainTooSmall);
}

TEST(DoubleShoot, EndStateRejectsUnmatchedSolution) {
    const Grid g = make_grid_for_spacing(1.5, 0.05);
    Shooter s(EquationKind::classical(), g, SolverConfig{});
    const MatchedSolution sol = s.shoot_unchecked(s.sample_inlet(profiles::cosine()));
    EXPECT_THROW(end_state(sol), NotMatched);
    EXPECT_EQ(end_state(sol, 1.0), sol.lam);
    EXPECT_THROW(s.shoot(std::vector<double>(3, 0.0)), GridMismatch);
}

TEST(DoubleShoot, EndStateConvergesAtFirstOrder) {
    // Nested grids keep the data jumps at pi/4 and 3pi/4 on nodes; mixing
    // alignments adds an O(h) term with a jumping constant.
    auto lam = [](std::size_t m) {
        Shooter s(EquationKind::classical(), make_grid(6, 60 * m, 64 * m), SolverConfig{});
        return s.shoot(s.sample_inlet(profiles::cosine())).lam;
    };
    const double l1 = lam(1), l2 = lam(2), l3 = lam(4);
    const double rate = std::log2(std::abs(l1 - l2) / std::abs(l2 - l3));
    EXPECT_NEAR(rate, 1.0, 0.3);
}

TEST(DoubleShoot, SolutionRelaxesExponentially) {
    const Grid g = make_grid_for_spacing(6, 0.04);
    Shooter s(EquationKind::classical(), g, SolverConfig{});
    const MatchedSolution sol = s.shoot(s.sample_inlet(profiles::cosine()));
    // Least-squares decay rate of log max_theta |f - lam| over 1 <= eta <= 4.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        const double eta = g.eta(i);
        if (eta < 1.0 || eta > 4.0) continue;
        double dev = 0.0;
        for (std::size_t j = 0; j < g.n_theta(); ++j) dev = std::max(dev, std::abs(sol.f.at(i, j) - sol.lam));
        const double y = std::log(dev);
        sx += eta, sy += y, sxx += eta * eta, sxy += eta * y, ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    EXPECT_LT(slope, -0.2);
}

TEST(Conservation, ClassicalSinMomentVanishesAtFirstOrder) {
    auto worst = [](double h) {
        Shooter s(EquationKind::classical(), make_grid_for_spacing(6, h), SolverConfig{});
        const MatchedSolution sol = s.shoot(s.sample_inlet(profiles::cosine()));
        return conservation_diagnostics(sol, EquationKind::classical()).max_abs_sin_moment;
    };
    const double e1 = worst(0.1), e2 = worst(0.05), e3 = worst(0.025);
    EXPECT_LT(e3, e2);
    EXPECT_LT(e2, e1);
    EXPECT_NEAR(std::log2(e2 / e3), 1.0, 0.3);
}

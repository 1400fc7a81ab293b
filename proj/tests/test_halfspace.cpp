#include <milne/halfspace.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace milne;

namespace {

constexpr double pi = std::numbers::pi;

// Reference values computed with 30-digit adaptive quadrature of the quintic cutoff.
constexpr double kVInfinity = 0.988917916534974050816369689588;
constexpr double kVEpsAt6 = 0.894118423152776176105726270779;  // eps = 0.1, eta = 6

Field random_field(const Grid& g, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Field f(g);
    for (double& v : f.values()) v = u(rng);
    return f;
}

bool dirichlet(const Grid& g, std::size_t i, std::size_t j) {
    return g.incoming_at_inlet(j) ? i == 0 : i == g.n_eta();
}

}  // namespace

TEST(Cutoff, PlateausAndMidpoint) {
    EXPECT_EQ(cutoff_psi(0.0), 1.0);
    EXPECT_EQ(cutoff_psi(0.3), 1.0);
    EXPECT_EQ(cutoff_psi(0.5), 1.0);
    EXPECT_EQ(cutoff_psi(0.75), 0.0);
    EXPECT_EQ(cutoff_psi(0.9), 0.0);
    EXPECT_NEAR(cutoff_psi(0.625), 0.5, 1e-15);
    EXPECT_THROW(cutoff_psi(-1e-12), InvalidArgument);
}

TEST(Cutoff, MonotoneBoundedAndSmoothAtJoins) {
    double prev = 1.0;
    for (int k = 0; k <= 4000; ++k) {
        const double r = k * 1e-3 / 4.0;
        const double p = cutoff_psi(r);
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        EXPECT_LE(p, prev + 1e-16);
        prev = p;
    }
    // C^2 joins: one-sided first differences shrink like h^2, second like h.
    for (double r0 : {0.5, 0.75}) {
        const double side = r0 == 0.5 ? 1.0 : -1.0;
        auto d1 = [&](double h) { return std::abs(cutoff_psi(r0 + side * h) - cutoff_psi(r0)) / h; };
        auto d2 = [&](double h) {
            return std::abs(cutoff_psi(r0 + 2 * side * h) - 2 * cutoff_psi(r0 + side * h) + cutoff_psi(r0)) / (h * h);
        };
        const double h = 1e-3;
        EXPECT_GT(d1(h) / d1(h / 2), 3.5);
        EXPECT_GT(d2(h) / d2(h / 2), 1.8);
        EXPECT_LT(d1(h / 2), 1e-3);
    }
}

TEST(VEps, FrozenValues) {
    EXPECT_NEAR(v_infinity(), kVInfinity, 1e-12);
    EXPECT_GE(v_infinity(), -std::log(0.5));
    EXPECT_LE(v_infinity(), -std::log(0.25));
    EXPECT_EQ(v_eps(0.0, 0.1), 0.0);
    EXPECT_NEAR(v_eps(2.0, 0.1), -std::log(0.8), 1e-13);
    EXPECT_NEAR(v_eps(6.0, 0.1), kVEpsAt6, 1e-12);
    EXPECT_EQ(v_eps(10.0, 0.1), v_infinity());
    EXPECT_EQ(v_eps(7.5, 0.1), v_infinity());
}

TEST(VEps, MonotoneAndConstantPastSupport) {
    for (double eps : {0.04, 0.1, 0.5}) {
        double prev = 0.0;
        for (int k = 0; k <= 400; ++k) {
            const double eta = k * 0.01 / eps;
            const double v = v_eps(eta, eps);
            EXPECT_GE(v, prev - 1e-15);
            prev = v;
            if (eps * eta >= 0.75) {
                EXPECT_EQ(v, v_infinity());
            }
        }
    }
    EXPECT_THROW(v_eps(-1.0, 0.1), InvalidArgument);
    EXPECT_THROW(v_eps(1.0, 0.0), InvalidArgument);
}

TEST(VEps, DerivativeMatchesCoefficient) {
    const double eps = 0.1, h = 1e-5;
    for (double eta : {1.0, 5.5, 6.5, 7.2}) {
        const double d = (v_eps(eta + h, eps) - v_eps(eta - h, eps)) / (2 * h);
        EXPECT_NEAR(d, milne_coefficient(eta, eps), 1e-8) << eta;
    }
}

TEST(Operator, ConstantsAreAnnihilatedOnInteriorRows) {
    const Grid g = make_grid(6, 12, 16);
    for (const auto kind : {EquationKind::classical(), EquationKind::milne(0.1), EquationKind::milne(0.9)}) {
        const Field r = apply_operator(kind, Field(g, 0.7));
        for (std::size_t i = 0; i < g.eta_count(); ++i) {
            for (std::size_t j = 0; j < g.n_theta(); ++j) {
                if (dirichlet(g, i, j)) {
                    EXPECT_NEAR(r.at(i, j), 0.7, 1e-15);
                } else {
                    EXPECT_NEAR(r.at(i, j), 0.0, 1e-13);
                }
            }
        }
    }
}

TEST(Operator, DirichletRowsHoldIdentityResidual) {
    const Grid g = make_grid(2, 4, 8);
    const Field f = random_field(g, 3);
    const IncomingData d = IncomingData::from_functions(g, [](double t) { return std::cos(t); },
                                                        [](double t) { return t; });
    const Field r = apply_operator(EquationKind::milne(0.2), f, d);
    const std::size_t half = g.n_theta() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        EXPECT_DOUBLE_EQ(r.at(0, half + k), f.at(0, half + k) - d.at_inlet[k]);
        EXPECT_DOUBLE_EQ(r.at(g.n_eta(), k), f.at(g.n_eta(), k) - d.at_outlet[k]);
    }
}

TEST(Operator, Linearity) {
    const Grid g = make_grid(3, 10, 12);
    const Field f = random_field(g, 1), h = random_field(g, 2);
    for (const auto kind : {EquationKind::classical(), EquationKind::milne(0.1)}) {
        const Field lhs = apply_operator(kind, combine(2.5, f, -1.25, h));
        const Field rhs = combine(2.5, apply_operator(kind, f), -1.25, apply_operator(kind, h));
        for (std::size_t k = 0; k < lhs.values().size(); ++k) {
            EXPECT_NEAR(lhs.values()[k], rhs.values()[k], 1e-12);
        }
    }
}

TEST(Operator, RejectsMismatchedData) {
    const Grid g = make_grid(1, 2, 8);
    IncomingData bad{std::vector<double>(3), std::vector<double>(4)};
    EXPECT_THROW(apply_operator(EquationKind::classical(), Field(g), bad), GridMismatch);
    EXPECT_THROW(EquationKind::milne(0.0), InvalidArgument);
    EXPECT_THROW(EquationKind::milne(1.0), InvalidArgument);
}

// sin d_eta f + f = 0 for f = exp(-eta/sin) on sin > 0; away from eta = 0 the upwind
// residual of that part is first order in d_eta.
TEST(Operator, ManufacturedCharacteristicConvergesAtFirstOrder) {
    auto error = [](std::size_t n_eta) {
        const Grid g = make_grid(4, n_eta, 64);
        const Field f = Field::from_function(g, [](double eta, double t) {
            return std::sin(t) > 0 ? std::exp(-eta / std::sin(t)) : 0.0;
        });
        const Field r = apply_operator(EquationKind::classical(), f);
        double worst = 0.0;
        for (std::size_t i = 1; i < g.eta_count(); ++i) {
            if (g.eta(i) < 1.0) continue;
            const double avg = angular_average(f, i);
            for (std::size_t j = g.first_positive(); j < g.n_theta(); ++j) {
                worst = std::max(worst, std::abs(r.at(i, j) + avg));
            }
        }
        return worst;
    };
    const double e1 = error(40), e2 = error(80), e3 = error(160);
    EXPECT_NEAR(std::log2(e1 / e2), 1.0, 0.15);
    EXPECT_NEAR(std::log2(e2 / e3), 1.0, 0.1);
}

// Smooth manufactured field for the geometric term: both upwind differences are first order.
TEST(Operator, ManufacturedMilneTermConvergesAtFirstOrder) {
    const double eps = 0.2;
    auto error = [eps](std::size_t n) {
        const Grid g = make_grid(3, n, 2 * n);
        auto exact_f = [](double eta, double t) { return std::cos(eta) * (2 + std::sin(t)); };
        const Field f = Field::from_function(g, exact_f);
        const Field r = apply_operator(EquationKind::milne(eps), f);
        double worst = 0.0;
        for (std::size_t i = 0; i < g.eta_count(); ++i) {
            const double eta = g.eta(i);
            const double avg = angular_average(f, i);
            for (std::size_t j = 0; j < g.n_theta(); ++j) {
                if (dirichlet(g, i, j)) continue;
                const double t = g.theta(j);
                const double f_eta = -std::sin(eta) * (2 + std::sin(t));
                const double f_theta = std::cos(eta) * std::cos(t);
                const double exact = std::sin(t) * f_eta + exact_f(eta, t) - avg -
                                     milne_coefficient(eta, eps) * std::cos(t) * f_theta;
                worst = std::max(worst, std::abs(r.at(i, j) - exact));
            }
        }
        return worst;
    };
    const double e1 = error(20), e2 = error(40), e3 = error(80);
    EXPECT_NEAR(std::log2(e1 / e2), 1.0, 0.2);
    EXPECT_NEAR(std::log2(e2 / e3), 1.0, 0.15);
}

TEST(Operator, SweepInvertsTransportPart) {
    const Grid g = make_grid(3, 9, 12);
    for (const auto kind : {EquationKind::classical(), EquationKind::milne(0.3)}) {
        const TransportOperator op(kind, g);
        const Field x = random_field(g, 11);
        std::vector<double> lx(op.size()), back(op.size());
        op.apply_transport(x.values(), lx);
        op.sweep(lx, back);
        for (std::size_t k = 0; k < back.size(); ++k) EXPECT_NEAR(back[k], x.values()[k], 1e-12);
    }
}

TEST(ImposeBoundary, OverwritesOnlyIncomingNodes) {
    const Grid g = make_grid(2, 3, 8);
    const auto h0 = [](double t) { return 0.5 + std::sin(t); };
    const IncomingData d = IncomingData::from_functions(g, h0, [](double) { return 0.0; });
    const Field once = impose_boundary(Field(g), d);
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        for (std::size_t j = 0; j < g.n_theta(); ++j) {
            const double want = (i == 0 && g.sin_theta(j) > 0) ? h0(g.theta(j)) : 0.0;
            EXPECT_DOUBLE_EQ(once.at(i, j), want);
        }
    }
    const Field twice = impose_boundary(once, d);
    for (std::size_t k = 0; k < once.values().size(); ++k) EXPECT_EQ(once.values()[k], twice.values()[k]);

    const Field unit = impose_boundary(Field(g, 5.0), IncomingData::constant(g, 0.0, 1.0));
    for (std::size_t j = 0; j < g.n_theta(); ++j) {
        if (g.sin_theta(j) > 0) {
            EXPECT_EQ(unit.at(0, j), 0.0);
            EXPECT_EQ(unit.at(g.n_eta(), j), 5.0);
        } else {
            EXPECT_EQ(unit.at(g.n_eta(), j), 1.0);
            EXPECT_EQ(unit.at(0, j), 5.0);
        }
    }
    EXPECT_THROW(impose_boundary(Field(g), IncomingData::constant(make_grid(2, 3, 4), 0, 0)), GridMismatch);
}

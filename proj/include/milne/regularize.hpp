#pragma once

// Modified incoming data with regular half-space solutions.
//
// First order: mix two solutions whose data share the interior but sit on the
// plateaus 0 and 1 near grazing, so the mixed trace is flat on the edge bands.
// Order N: tilde f = lam R1 + (1 - lam) R2 + sum_k c_k F_k, with the c_k fixed by a
// triangular recursion whose brackets each come from an auxiliary half-space solve.

#include "errors.hpp"
#include "grid.hpp"
#include "halfspace.hpp"
#include "profiles.hpp"
#include "solver.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace milne {

namespace detail {

inline double smoothstep5(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

inline void check_alpha(double alpha, const char* where) {
    if (!(alpha > 0.0 && alpha < std::numbers::pi / 4.0)) {
        throw InvalidArgument(std::string(where) + ": alpha must lie in (0, pi/4)");
    }
}

}  // namespace detail

/// Profile on [0, pi] that equals `edge` within alpha of 0 and pi, `interior` beyond
/// 2 alpha, and blends the two with a quintic smoothstep in between.
struct EdgeProfile {
    double alpha = 0.0;
    Profile edge;
    Profile interior;
    /// Upper bound applied on the transition bands (infinite when unclipped).
    double bridge_cap = std::numeric_limits<double>::infinity();

    double operator()(double theta) const {
        const double d = std::min(theta, std::numbers::pi - theta);
        if (d <= alpha) return edge(theta);
        if (d >= 2.0 * alpha) return interior(theta);
        const double s = detail::smoothstep5((d - alpha) / alpha);
        return std::min((1.0 - s) * edge(theta) + s * interior(theta), bridge_cap);
    }

    Profile as_profile() const {
        return [p = *this](double t) { return p(t); };
    }
};

inline EdgeProfile build_edge_profile(double plateau, Profile interior, double alpha) {
    detail::check_alpha(alpha, "build_edge_profile");
    return {alpha, profiles::constant(plateau), std::move(interior)};
}

/// sin^k on the edge bands, 0 in the middle, never above sin^k(alpha) in between.
inline EdgeProfile build_fk(int k, double alpha) {
    if (k < 1) throw InvalidArgument("build_fk: k must be at least 1");
    detail::check_alpha(alpha, "build_fk");
    auto sin_k = [k](double t) { return std::pow(std::sin(t), k); };
    return {alpha, sin_k, profiles::constant(0.0), std::pow(std::sin(alpha), k)};
}

/// (-1)^M (f(0,theta) - <f>(0) - sum_{k<M} c_k sin^k theta) / sin^M theta at every theta
/// node. `c` holds c_1, c_2, ... and only its first M-1 entries are used.
inline std::vector<double> eta_derivative_trace(const Field& f, const std::vector<double>& c,
                                                int order_m) {
    if (order_m < 1) throw InvalidArgument("eta_derivative_trace: order must be at least 1");
    if (c.size() + 1 < static_cast<std::size_t>(order_m)) {
        throw InvalidArgument("eta_derivative_trace: need c_1..c_{M-1}");
    }
    const Grid& g = f.grid();
    const double avg = angular_average(f, 0);
    const double sign = order_m % 2 == 0 ? 1.0 : -1.0;
    std::vector<double> out(g.n_theta());
    for (std::size_t j = 0; j < g.n_theta(); ++j) {
        const double s = g.sin_theta(j);
        double v = f.at(0, j) - avg;
        double sk = 1.0;
        for (int k = 1; k < order_m; ++k) {
            sk *= s;
            v -= c[static_cast<std::size_t>(k - 1)] * sk;
        }
        out[j] = sign * v / std::pow(s, order_m);
    }
    return out;
}

enum class MixForm { Matching, Alternate, Neither };

inline const char* to_string(MixForm m) {
    switch (m) {
        case MixForm::Matching: return "matching";
        case MixForm::Alternate: return "alternate";
        case MixForm::Neither: return "neither";
    }
    return "neither";
}

struct FirstOrderMix {
    double lambda0 = 0.0;
    Field tilde_f;
    /// f1(0,0+) - <f1>(0) and f2(0,0+) - <f2>(0).
    double defect1 = 0.0;
    double defect2 = 0.0;
    /// (1 - <f2>) / (1 - <f2> + <f1>), from the defect-matching argument.
    double matching_form = 0.0;
    /// (1 - <f2>) / (1 + <f2> - <f1>), an alternative closed form kept for comparison.
    double alternate_form = 0.0;
    MixForm matches = MixForm::Neither;
    /// max over edge-band inlet nodes of |tilde_f(0,theta) - <tilde_f>(0)|.
    double edge_flatness = 0.0;
};

/// Mixes two solutions so the defects f(0,0+) - <f>(0) cancel.
///
/// f1 and f2 solve problems whose data equal plateau1 and plateau2 on the edge bands
/// [0, edge_width] and [pi - edge_width, pi]; the plateau values are the exact
/// theta -> 0+ limits of the traces.
inline FirstOrderMix first_order_mix(const Field& f1, const Field& f2, double edge_width,
                                     double plateau1 = 0.0, double plateau2 = 1.0) {
    require_same_grid(f1, f2, "first_order_mix");
    const double avg1 = angular_average(f1, 0);
    const double avg2 = angular_average(f2, 0);
    FirstOrderMix mix;
    mix.defect1 = plateau1 - avg1;
    mix.defect2 = plateau2 - avg2;
    const double gap = mix.defect2 - mix.defect1;
    if (!(std::abs(gap) > 1e-8 * (1.0 + std::abs(mix.defect1) + std::abs(mix.defect2)))) {
        throw MixDegenerate("first_order_mix: the two defects coincide (" +
                            std::to_string(mix.defect1) + ", " + std::to_string(mix.defect2) + ")");
    }
    mix.lambda0 = mix.defect2 / gap;
    mix.tilde_f = combine(mix.lambda0, f1, 1.0 - mix.lambda0, f2);
    mix.matching_form = (1.0 - avg2) / (1.0 - avg2 + avg1);
    mix.alternate_form = (1.0 - avg2) / (1.0 + avg2 - avg1);
    const double tol = 1e-9 * (1.0 + std::abs(mix.lambda0));
    if (std::abs(mix.lambda0 - mix.matching_form) <= tol) {
        mix.matches = MixForm::Matching;
    } else if (std::abs(mix.lambda0 - mix.alternate_form) <= tol) {
        mix.matches = MixForm::Alternate;
    }
    const Grid& g = f1.grid();
    const double avg = angular_average(mix.tilde_f, 0);
    for (std::size_t j = g.first_positive(); j < g.n_theta(); ++j) {
        const double t = g.theta(j);
        if (t <= edge_width || t >= std::numbers::pi - edge_width) {
            mix.edge_flatness = std::max(mix.edge_flatness, std::abs(mix.tilde_f.at(0, j) - avg));
        }
    }
    return mix;
}

struct RegularizationSet {
    int order_n = 0;
    double alpha = 0.0;
    /// c[k-1] = c_k.
    std::vector<double> c;
    double lambda_n = 0.0;
    /// mu[0] = mu_0, mu[k] = mu_k.
    std::vector<double> mu;
    MatchedSolution r1;
    MatchedSolution r2;
    std::vector<MatchedSolution> fk;
    /// Modified data on the inlet nodes (theta_j, j >= n_theta/2).
    std::vector<double> tilde_h0;
    /// Original data on the same nodes.
    std::vector<double> h0;

    /// brackets[M-1][i] = <S_{M,i}>(0) for i in {0, M..N}; NaN elsewhere.
    std::vector<std::vector<double>> brackets;
    /// beta[M-1][i] = beta_{M,i}; NaN where undefined.
    std::vector<std::vector<double>> beta;
    std::size_t auxiliary_solves = 0;
    std::size_t base_solves = 0;

    const Grid& grid() const { return r1.f.grid(); }
};

namespace detail {

inline double bracket_at_inlet(Shooter& shooter, const std::vector<double>& inlet) {
    MatchedSolution sol = shooter.shoot_unchecked(inlet);
    return angular_average(sol.f, 0);
}

}  // namespace detail

/// |c_M - (<S_{M,0}> + sum_{k>=M} c_k <S_{M,k}>)| / max(1, |c_M|) for M = 1..N.
inline std::vector<double> closure_residuals(const RegularizationSet& set) {
    std::vector<double> out;
    const int n = set.order_n;
    for (int m = 1; m <= n; ++m) {
        const auto& br = set.brackets[static_cast<std::size_t>(m - 1)];
        double rhs = br[0];
        for (int k = m; k <= n; ++k) rhs += set.c[static_cast<std::size_t>(k - 1)] * br[static_cast<std::size_t>(k)];
        const double cm = set.c[static_cast<std::size_t>(m - 1)];
        out.push_back(std::abs(cm - rhs) / std::max(1.0, std::abs(cm)));
    }
    return out;
}

/// Builds the order-N modified data for h0 on the given grid (classical kind).
/// Order 0 yields the first-order mix written in the same form (no c_k).
inline RegularizationSet compute_ck(int order_n, double alpha, const Profile& h0, const Grid& grid,
                                    const SolverConfig& cfg) {
    if (order_n < 0) throw InvalidArgument("compute_ck: order must be non-negative");
    detail::check_alpha(alpha, "compute_ck");
    const std::size_t n = static_cast<std::size_t>(order_n);
    Shooter shooter(EquationKind::classical(), grid, cfg);
    const std::size_t half = grid.n_theta() / 2;

    RegularizationSet set;
    set.order_n = order_n;
    set.alpha = alpha;
    const std::vector<double> r1_data = shooter.sample_inlet(build_edge_profile(1.0, h0, alpha).as_profile());
    const std::vector<double> r2_data = shooter.sample_inlet(build_edge_profile(0.0, h0, alpha).as_profile());
    std::vector<std::vector<double>> fk_data;
    for (int k = 1; k <= order_n; ++k) fk_data.push_back(shooter.sample_inlet(build_fk(k, alpha).as_profile()));
    set.h0 = shooter.sample_inlet(h0);

    set.r1 = shooter.shoot(r1_data);
    set.r2 = shooter.shoot(r2_data);
    for (const auto& d : fk_data) set.fk.push_back(shooter.shoot(d));
    set.base_solves = 2 + n;

    const double avg_r1 = angular_average(set.r1.f, 0);
    const double avg_r2 = angular_average(set.r2.f, 0);
    const double denom = 1.0 - avg_r1 + avg_r2;
    if (std::abs(denom) < 1e-6) throw RecursionDegenerate(0, denom);
    set.mu.push_back(avg_r2 / denom);
    for (const auto& f : set.fk) set.mu.push_back(angular_average(f.f, 0) / denom);

    // S_{1,i} = H_i / sin on the inlet nodes.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> sines(half);
    for (std::size_t q = 0; q < half; ++q) sines[q] = grid.sin_theta(half + q);
    std::vector<std::vector<double>> s(n + 1, std::vector<double>(half, nan));
    for (std::size_t q = 0; q < half; ++q) {
        const double shift = r1_data[q] - r2_data[q] - 1.0;
        s[0][q] = (set.mu[0] * shift + r2_data[q]) / sines[q];
        for (std::size_t k = 1; k <= n; ++k) s[k][q] = (set.mu[k] * shift + fk_data[k - 1][q]) / sines[q];
    }

    set.brackets.assign(n, std::vector<double>(n + 1, nan));
    set.beta.assign(n, std::vector<double>(n + 1, nan));
    for (std::size_t m = 1; m <= n; ++m) {
        if (m > 1) {
            // S_{M,i} = (S_{M-1,i} - beta_{M-1,i} (1 - S_{M-1,M-1})) / sin, for i in {0, M..N}.
            const auto& prev_beta = set.beta[m - 2];
            const std::vector<double> pivot = s[m - 1];
            for (std::size_t i = 0; i <= n; ++i) {
                if (i != 0 && i < m) continue;
                for (std::size_t q = 0; q < half; ++q) {
                    s[i][q] = (s[i][q] - prev_beta[i] * (1.0 - pivot[q])) / sines[q];
                }
            }
        }
        auto& br = set.brackets[m - 1];
        for (std::size_t i = 0; i <= n; ++i) {
            if (i != 0 && i < m) continue;
            br[i] = detail::bracket_at_inlet(shooter, s[i]);
            ++set.auxiliary_solves;
        }
        const double d = 1.0 - br[m];
        if (std::abs(d) < 1e-6) throw RecursionDegenerate(static_cast<int>(m), d);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i != 0 && i <= m) continue;
            set.beta[m - 1][i] = br[i] / d;
        }
    }

    set.c.assign(n, 0.0);
    for (std::size_t m = n; m >= 1; --m) {
        double v = set.beta[m - 1][0];
        for (std::size_t k = m + 1; k <= n; ++k) v += set.c[k - 1] * set.beta[m - 1][k];
        set.c[m - 1] = v;
    }
    set.lambda_n = set.mu[0];
    for (std::size_t k = 1; k <= n; ++k) set.lambda_n += set.c[k - 1] * set.mu[k];

    set.tilde_h0.resize(half);
    for (std::size_t q = 0; q < half; ++q) {
        double v = r2_data[q] + set.lambda_n * (r1_data[q] - r2_data[q]);
        for (std::size_t k = 1; k <= n; ++k) v += set.c[k - 1] * fk_data[k - 1][q];
        set.tilde_h0[q] = v;
    }
    return set;
}

/// tilde f = lam_N R1 + (1 - lam_N) R2 + sum_k c_k F_k with its end state.
inline MatchedSolution assemble_tilde_f(const RegularizationSet& set) {
    const double lam = set.lambda_n;
    auto mix = [&](auto pick) {
        Field out = combine(lam, pick(set.r1), 1.0 - lam, pick(set.r2));
        for (std::size_t k = 0; k < set.fk.size(); ++k) out = combine(1.0, out, set.c[k], pick(set.fk[k]));
        return out;
    };
    MatchedSolution sol;
    sol.f = mix([](const MatchedSolution& m) -> const Field& { return m.f; });
    sol.f1 = mix([](const MatchedSolution& m) -> const Field& { return m.f1; });
    sol.f2 = set.r1.f2;
    sol.lam = lam * set.r1.lam + (1.0 - lam) * set.r2.lam;
    for (std::size_t k = 0; k < set.fk.size(); ++k) sol.lam += set.c[k] * set.fk[k].lam;
    const Grid& g = sol.f.grid();
    for (std::size_t j = 0; j < g.n_theta(); ++j) {
        sol.constancy_residual = std::max(sol.constancy_residual, std::abs(sol.f.at(g.n_eta(), j) - sol.lam));
    }
    sol.f1_stats = set.r1.f1_stats;
    sol.f2_stats = set.r1.f2_stats;
    return sol;
}

}  // namespace milne

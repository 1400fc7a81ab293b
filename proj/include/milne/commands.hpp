#pragma once

// The solve / regularize / study commands. Each validates its config, runs, and
// commits its artifacts in one step so a failed run leaves no partial output.

#include "artifacts.hpp"
#include "errors.hpp"
#include "profiles.hpp"
#include "regularize.hpp"
#include "run_config.hpp"
#include "solver.hpp"
#include "study.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <vector>

namespace milne {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int internal = 1;
inline constexpr int usage = 2;
inline constexpr int recursion_degenerate = 3;
inline constexpr int partial_failure = 4;
inline constexpr int non_convergence = 5;
inline constexpr int domain_too_small = 6;
inline constexpr int degenerate_shot = 7;
inline constexpr int mix_degenerate = 8;
inline constexpr int size_guard = 9;
inline constexpr int io_error = 10;
}  // namespace exit_code

/// One code per error type; anything unrecognised is an internal error.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const GridMismatch*>(&e) ||
        dynamic_cast<const RayLeavesDomain*>(&e)) {
        return exit_code::usage;
    }
    if (dynamic_cast<const RecursionDegenerate*>(&e)) return exit_code::recursion_degenerate;
    if (dynamic_cast<const NonConvergence*>(&e)) return exit_code::non_convergence;
    if (dynamic_cast<const DomainTooSmall*>(&e) || dynamic_cast<const NotMatched*>(&e)) {
        return exit_code::domain_too_small;
    }
    if (dynamic_cast<const DegenerateShot*>(&e)) return exit_code::degenerate_shot;
    if (dynamic_cast<const MixDegenerate*>(&e)) return exit_code::mix_degenerate;
    if (dynamic_cast<const SizeGuard*>(&e) || dynamic_cast<const SingularMatrix*>(&e)) {
        return exit_code::size_guard;
    }
    if (dynamic_cast<const IoError*>(&e)) return exit_code::io_error;
    return exit_code::internal;
}

struct CommandResult {
    int exit_code = exit_code::ok;
    /// Human-readable summary lines for stdout.
    std::vector<std::string> lines;
    /// Artifact names, relative to the output directory.
    std::vector<std::string> files;
};

namespace detail {

inline Grid grid_for(const RunConfig& c, double default_spacing) {
    if (c.n_eta != 0) return make_grid(c.R, c.n_eta, c.n_theta);
    return make_grid_for_spacing(c.R, c.spacing > 0.0 ? c.spacing : default_spacing);
}

inline std::string field_name(const RunConfig& c, const std::string& stem) {
    return stem + (c.field_format == "bin" ? ".bin" : ".csv");
}

inline std::string fmt(double v) { return format_double(v); }

/// Slope of log|y| against log(1/x); NaN when a value vanishes or fewer than two points.
inline double inverse_power_exponent(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(y[i]) > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += -std::log(x[i]);
        my += std::log(std::abs(y[i]));
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = -std::log(x[i]) - mx;
        sxy += dx * (std::log(std::abs(y[i])) - my);
        sxx += dx * dx;
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

inline std::string inlet_csv(const Grid& g, const std::vector<double>& h0, const std::vector<double>& tilde) {
    std::string s = "theta,h0,tilde_h0\n";
    for (std::size_t q = 0; q < tilde.size(); ++q) {
        s += fmt(g.theta(g.first_positive() + q)) + "," + fmt(h0[q]) + "," + fmt(tilde[q]) + "\n";
    }
    return s;
}

inline MatchedSolution shoot_for(Shooter& shooter, const Profile& data, const RunConfig& c) {
    if (c.auto_retry) {
        return double_shoot_with_retry(shooter.kind(), data, shooter.grid(), shooter.config());
    }
    return shooter.shoot(shooter.sample_inlet(data));
}

}  // namespace detail

/// Solves one half-space problem by double shooting.
inline CommandResult cmd_solve(const RunConfig& c) {
    validate(c, "solve");
    const EquationKind kind = c.equation();
    const Grid grid = detail::grid_for(c, kind.is_milne() ? c.eps : 0.04);
    const Profile h0 = profiles::parse(c.h0);
    Shooter shooter(kind, grid, c.solver());
    const MatchedSolution sol = detail::shoot_for(shooter, h0, c);
    const ConservationReport cons = conservation_diagnostics(sol, kind);

    ArtifactWriter w(c.out);
    const std::string field = detail::field_name(c, "solution");
    w.add_field(field, sol.f);
    std::string header = matched_header(sol, kind);
    header += detail::kv("h0", c.h0);
    header += detail::kv("sin2_moment_at_inlet", cons.sin2_moment_at_inlet);
    header += detail::kv("conservation_defect", cons.defect);
    header += detail::kv("max_abs_sin_moment", cons.max_abs_sin_moment);
    header += detail::kv("field", field);
    w.add("solution.txt", header);
    std::string moments = "eta,sin_moment\n";
    const Grid& g = sol.f.grid();
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        moments += detail::fmt(g.eta(i)) + "," + detail::fmt(cons.sin_moment[i]) + "\n";
    }
    w.add("conservation.csv", moments);
    w.commit();

    CommandResult r;
    r.files = w.names();
    r.lines.push_back("lam = " + detail::fmt(sol.lam));
    r.lines.push_back("constancy_residual = " + detail::fmt(sol.constancy_residual));
    r.lines.push_back("grid = " + detail::fmt(g.depth()) + " x " + std::to_string(g.n_eta()) + " x " +
                      std::to_string(g.n_theta()));
    return r;
}

namespace detail {

inline CommandResult regularize_first_order(const RunConfig& c) {
    const double alpha = c.alpha.front();
    const Grid grid = grid_for(c, std::min(0.025, alpha / 10.0));
    const Profile phi1 = profiles::parse(c.phi1);
    const Profile phi2 = profiles::parse(c.phi2);
    // Values of the data at grazing incidence.
    const double tiny = std::numeric_limits<double>::min();
    const double plateau1 = phi1(tiny);
    const double plateau2 = phi2(tiny);

    // Both solves share one grid, so auto-retry grows R for the pair.
    const SolverConfig cfg = c.solver();
    Grid g_try = grid;
    MatchedSolution f1, f2;
    for (int attempt = 1;; ++attempt) {
        Shooter shooter(EquationKind::classical(), g_try, cfg);
        f1 = shooter.shoot_unchecked(shooter.sample_inlet(phi1));
        f2 = shooter.shoot_unchecked(shooter.sample_inlet(phi2));
        const double worst = std::max(f1.constancy_residual, f2.constancy_residual);
        if (worst <= cfg.lambda_const_tol) break;
        if (!c.auto_retry || attempt >= 4) throw DomainTooSmall(worst, g_try.depth());
        const double depth = g_try.depth() * cfg.r_growth;
        g_try = make_grid(depth, static_cast<std::size_t>(std::ceil(depth / g_try.d_eta() - 1e-9)),
                          g_try.n_theta());
    }
    const FirstOrderMix mix = first_order_mix(f1.f, f2.f, alpha, plateau1, plateau2);

    const Grid& g = f1.f.grid();
    const auto d1 = eta_derivative_trace(f1.f, {}, 1);
    const auto d2 = eta_derivative_trace(f2.f, {}, 1);
    const auto dt = eta_derivative_trace(mix.tilde_f, {}, 1);
    std::string trace = "theta,f1,f2,tilde_f\n";
    for (std::size_t j = 0; j < g.n_theta(); ++j) {
        trace += fmt(g.theta(j)) + "," + fmt(d1[j]) + "," + fmt(d2[j]) + "," + fmt(dt[j]) + "\n";
    }
    std::string inlet = "theta,phi1,phi2,tilde_h0\n";
    for (std::size_t j = g.first_positive(); j < g.n_theta(); ++j) {
        const double t = g.theta(j);
        inlet += fmt(t) + "," + fmt(phi1(t)) + "," + fmt(phi2(t)) + "," +
                 fmt(mix.lambda0 * phi1(t) + (1.0 - mix.lambda0) * phi2(t)) + "\n";
    }

    ArtifactWriter w(c.out);
    w.add("first_order.json", first_order_json(mix, alpha));
    w.add("tilde_h0.csv", inlet);
    w.add("derivative_trace.csv", trace);
    w.add_field(field_name(c, "f1"), f1.f);
    w.add_field(field_name(c, "f2"), f2.f);
    w.add_field(field_name(c, "tilde_f"), mix.tilde_f);
    w.commit();

    CommandResult r;
    r.files = w.names();
    r.lines.push_back("lambda0 = " + fmt(mix.lambda0));
    r.lines.push_back("matches = " + std::string(to_string(mix.matches)));
    r.lines.push_back("edge_flatness = " + fmt(mix.edge_flatness));
    return r;
}

inline nlohmann::json traces_json(const RegularizationSet& set, const MatchedSolution& tilde) {
    // sup over the edge bands of |M-th trace| of tilde f, M = 1..N.
    const Grid& g = tilde.f.grid();
    nlohmann::json out = nlohmann::json::array();
    for (int m = 1; m <= set.order_n; ++m) {
        const auto tr = eta_derivative_trace(tilde.f, set.c, m);
        double sup = 0.0;
        for (std::size_t j = g.first_positive(); j < g.n_theta(); ++j) {
            const double t = g.theta(j);
            if (t <= set.alpha || t >= std::numbers::pi - set.alpha) sup = std::max(sup, std::abs(tr[j]));
        }
        out.push_back({{"M", m}, {"sup_edge", sup}});
    }
    return out;
}

inline CommandResult regularize_full(const RunConfig& c) {
    const double min_alpha = *std::min_element(c.alpha.begin(), c.alpha.end());
    const Grid grid = grid_for(c, std::min(0.025, min_alpha / 10.0));
    const Profile h0 = profiles::parse(c.h0);
    ArtifactWriter w(c.out);
    CommandResult r;

    if (!c.sweep) {
        const RegularizationSet set = compute_ck(c.order, c.alpha.front(), h0, grid, c.solver());
        const MatchedSolution tilde = assemble_tilde_f(set);
        std::vector<std::string> base{field_name(c, "R1"), field_name(c, "R2")};
        for (int k = 1; k <= c.order; ++k) base.push_back(field_name(c, "F" + std::to_string(k)));
        nlohmann::json j = regularization_json(set, base);
        j["trace_sup"] = traces_json(set, tilde);
        w.add("regularization.json", j.dump(2) + "\n");
        w.add("tilde_h0.csv", inlet_csv(grid, set.h0, set.tilde_h0));
        std::string trace = "theta";
        for (int m = 1; m <= c.order; ++m) trace += ",M" + std::to_string(m);
        trace += "\n";
        std::vector<std::vector<double>> cols;
        for (int m = 1; m <= c.order; ++m) cols.push_back(eta_derivative_trace(tilde.f, set.c, m));
        for (std::size_t jj = 0; jj < grid.n_theta(); ++jj) {
            trace += fmt(grid.theta(jj));
            for (const auto& col : cols) trace += "," + fmt(col[jj]);
            trace += "\n";
        }
        w.add("derivative_trace.csv", trace);
        w.add_field(base[0], set.r1.f);
        w.add_field(base[1], set.r2.f);
        for (std::size_t k = 0; k < set.fk.size(); ++k) w.add_field(base[2 + k], set.fk[k].f);
        w.add_field(field_name(c, "tilde_f"), tilde.f);
        w.commit();
        r.files = w.names();
        r.lines.push_back("lambda_n = " + fmt(set.lambda_n));
        for (std::size_t k = 0; k < set.c.size(); ++k) {
            r.lines.push_back("c" + std::to_string(k + 1) + " = " + fmt(set.c[k]));
        }
        return r;
    }

    std::vector<RegularizationSet> sets;
    for (double a : c.alpha) sets.push_back(compute_ck(c.order, a, h0, grid, c.solver()));
    std::string table = "alpha";
    for (int k = 1; k <= c.order; ++k) table += ",c" + std::to_string(k);
    table += ",lambda_n\n";
    for (const auto& s : sets) {
        table += fmt(s.alpha);
        for (double v : s.c) table += "," + fmt(v);
        table += "," + fmt(s.lambda_n) + "\n";
    }
    nlohmann::json scaling;
    scaling["alpha"] = c.alpha;
    scaling["grid"] = {{"R", grid.depth()}, {"n_eta", grid.n_eta()}, {"n_theta", grid.n_theta()}};
    nlohmann::json fits = nlohmann::json::array();
    for (int k = 1; k <= c.order; ++k) {
        std::vector<double> ck;
        for (const auto& s : sets) ck.push_back(s.c[static_cast<std::size_t>(k - 1)]);
        const double e = inverse_power_exponent(c.alpha, ck);
        fits.push_back({{"k", k}, {"c", ck}, {"exponent", number_or_null(e)}, {"expected", k - 1}});
        r.lines.push_back("c" + std::to_string(k) + " ~ alpha^-" + fmt(e) + " (expected " +
                          std::to_string(k - 1) + ")");
    }
    scaling["fits"] = fits;
    nlohmann::json records = nlohmann::json::array();
    for (const auto& s : sets) records.push_back(regularization_json(s));
    scaling["records"] = records;
    w.add("scaling.csv", table);
    w.add("scaling.json", scaling.dump(2) + "\n");
    w.commit();
    r.files = w.names();
    return r;
}

}  // namespace detail

/// Order 1 mixes the phi1/phi2 pair; --full runs the order-N recursion on h0.
inline CommandResult cmd_regularize(const RunConfig& c) {
    validate(c, "regularize");
    return c.full ? detail::regularize_full(c) : detail::regularize_first_order(c);
}

/// eps-sweep against the classical solution. Exit 4 when some eps failed; the
/// completed ones are still written together with failures.json.
inline CommandResult cmd_study(const RunConfig& c) {
    validate(c, "study");
    StudyOptions opts;
    opts.depth = c.R;
    opts.spacing_factor = c.spacing_factor;
    opts.ray = c.ray;
    opts.ray_n_max = c.nmax;
    opts.workers = c.workers;
    const StudyReport report = convergence_study(c.eps_list, profiles::parse(c.h0), c.solver(), opts);

    ArtifactWriter w(c.out);
    add_study_artifacts(w, report, c.ray);
    w.commit();

    CommandResult r;
    r.files = w.names();
    for (const auto& rec : report.records) {
        r.lines.push_back("eps = " + detail::fmt(rec.eps) + "  l2 = " + detail::fmt(rec.errors.l2) +
                          "  linf_at_R = " + detail::fmt(rec.errors.linf_at_R) +
                          "  lambda_gap = " + detail::fmt(rec.lambda_gap));
    }
    for (const auto& f : report.failures) {
        r.lines.push_back("eps = " + detail::fmt(f.eps) + "  failed: " + f.error + ": " + f.message);
    }
    r.lines.push_back("slope l2 = " + detail::fmt(report.slopes.l2) +
                      "  lambda_gap = " + detail::fmt(report.slopes.lambda_gap));
    if (!report.ok()) r.exit_code = exit_code::partial_failure;
    return r;
}

}  // namespace milne

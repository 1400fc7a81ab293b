#pragma once

// eps-sweeps comparing eps-Milne and classical solutions on shared grids.

#include "errors.hpp"
#include "grid.hpp"
#include "halfspace.hpp"
#include "profiles.hpp"
#include "solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace milne {

struct ErrorNorms {
    double l2 = 0.0;
    double linf_domain = 0.0;
    double linf_at_R = 0.0;
};

/// Norms of f_eps - f. The L2 norm uses trapezoid weights in eta (half weight on the
/// end rows), so a constant difference c gives |c| sqrt(2 pi R) exactly.
inline ErrorNorms error_norms(const Field& f_eps, const Field& f) {
    require_same_grid(f_eps, f, "error_norms");
    const Grid& g = f.grid();
    ErrorNorms e;
    double sum = 0.0;
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        const double w = (i == 0 || i == g.n_eta()) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < g.n_theta(); ++j) {
            const double d = std::abs(f_eps.at(i, j) - f.at(i, j));
            sum += w * d * d;
            e.linf_domain = std::max(e.linf_domain, d);
            if (i == g.n_eta()) e.linf_at_R = std::max(e.linf_at_R, d);
        }
    }
    e.l2 = std::sqrt(sum * g.d_eta() * g.d_theta());
    return e;
}

/// Bilinear interpolation in (eta, theta), periodic in theta.
inline double interpolate(const Field& f, double eta, double theta) {
    const Grid& g = f.grid();
    if (!(eta >= 0.0 && eta <= g.depth())) {
        throw RayLeavesDomain("interpolate: eta = " + std::to_string(eta) + " outside [0, R]");
    }
    const double x = eta / g.d_eta();
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(x), g.n_eta() - 1);
    const double wx = x - static_cast<double>(i);
    const auto nt = static_cast<long long>(g.n_theta());
    const double y = (theta + std::numbers::pi) / g.d_theta() - 0.5;
    const double fy = std::floor(y);
    const double wy = y - fy;
    const auto j0 = static_cast<std::size_t>(((static_cast<long long>(fy) % nt) + nt) % nt);
    const std::size_t j1 = (j0 + 1) % g.n_theta();
    const double lo = (1.0 - wy) * f.at(i, j0) + wy * f.at(i, j1);
    const double hi = (1.0 - wy) * f.at(i + 1, j0) + wy * f.at(i + 1, j1);
    return (1.0 - wx) * lo + wx * hi;
}

/// (f_eps - f)(n eps, n eps) for n = 0..n_max.
inline std::vector<double> ray_error(const Field& f_eps, const Field& f, double eps, std::size_t n_max) {
    require_same_grid(f_eps, f, "ray_error");
    if (!(eps > 0.0)) throw InvalidArgument("ray_error: eps must be positive");
    const double reach = static_cast<double>(n_max) * eps;
    if (reach > f.grid().depth() || reach > std::numbers::pi) {
        throw RayLeavesDomain("ray_error: n_max * eps = " + std::to_string(reach) +
                              " leaves the strip or exceeds pi");
    }
    std::vector<double> out(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double t = static_cast<double>(n) * eps;
        out[n] = interpolate(f_eps, t, t) - interpolate(f, t, t);
    }
    return out;
}

struct ConservationReport {
    /// Un-normalized sin-moment at every eta level.
    std::vector<double> sin_moment;
    double max_abs_sin_moment = 0.0;
    /// Integral of f(0, theta) sin^2 theta over the circle.
    double sin2_moment_at_inlet = 0.0;
    /// |sin2_moment_at_inlet - pi lam|.
    double defect = 0.0;
    bool milne = false;
};

inline ConservationReport conservation_diagnostics(const MatchedSolution& sol, const EquationKind& kind) {
    const Grid& g = sol.f.grid();
    ConservationReport r;
    r.milne = kind.is_milne();
    r.sin_moment.resize(g.eta_count());
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        r.sin_moment[i] = weighted_moment(sol.f, i, MomentWeight::Sin);
        r.max_abs_sin_moment = std::max(r.max_abs_sin_moment, std::abs(r.sin_moment[i]));
    }
    r.sin2_moment_at_inlet = weighted_moment(sol.f, 0, MomentWeight::Sin2);
    r.defect = std::abs(r.sin2_moment_at_inlet - std::numbers::pi * sol.lam);
    return r;
}

/// Least-squares slope of log(value) against log(eps). With three or more points the
/// largest eps is dropped as pre-asymptotic. NaN when any used value is not positive.
inline double fit_slope(std::vector<double> eps, std::vector<double> values) {
    if (eps.size() != values.size()) throw InvalidArgument("fit_slope: size mismatch");
    if (eps.size() >= 3) {
        const auto k = static_cast<std::size_t>(std::max_element(eps.begin(), eps.end()) - eps.begin());
        eps.erase(eps.begin() + static_cast<std::ptrdiff_t>(k));
        values.erase(values.begin() + static_cast<std::ptrdiff_t>(k));
    }
    const std::size_t n = eps.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(eps[i] > 0.0) || !(values[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        mx += std::log(eps[i]);
        my += std::log(values[i]);
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(eps[i]) - mx;
        sxy += dx * (std::log(values[i]) - my);
        sxx += dx * dx;
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

struct StudyOptions {
    double depth = 6.0;
    /// Mesh spacing as a fraction of eps; must lie in (0, 1].
    double spacing_factor = 1.0;
    bool ray = true;
    std::size_t ray_n_max = 40;
    std::size_t workers = 1;
    /// Domain enlargements allowed per eps before DomainTooSmall is reported.
    int max_attempts = 4;
};

struct StudyRecord {
    double eps = 0.0;
    double depth = 0.0;
    std::size_t n_eta = 0;
    std::size_t n_theta = 0;
    double d_eta = 0.0;
    double d_theta = 0.0;
    ErrorNorms errors;
    double lam_classical = 0.0;
    double lam_milne = 0.0;
    double lambda_gap = 0.0;
    double constancy_classical = 0.0;
    double constancy_milne = 0.0;
    ConservationReport conservation_classical;
    ConservationReport conservation_milne;
    std::size_t iterations_classical = 0;
    std::size_t iterations_milne = 0;
    /// (f_eps - f)(n eps, n eps), n = 0..; empty when the ray is disabled.
    std::vector<double> ray;
};

struct StudyFailure {
    double eps = 0.0;
    std::string error;
    std::string message;
};

struct StudySlopes {
    double l2 = 0.0;
    double linf_at_R = 0.0;
    double linf_domain = 0.0;
    double lambda_gap = 0.0;
    double conservation_defect = 0.0;
};

struct StudyReport {
    std::vector<double> eps_list;
    /// Successful runs, in eps_list order.
    std::vector<StudyRecord> records;
    std::vector<StudyFailure> failures;
    StudySlopes slopes;

    bool ok() const { return failures.empty(); }
};

namespace detail {

inline std::string error_name(const std::exception& e) {
    if (dynamic_cast<const NonConvergence*>(&e)) return "NonConvergence";
    if (dynamic_cast<const DomainTooSmall*>(&e)) return "DomainTooSmall";
    if (dynamic_cast<const DegenerateShot*>(&e)) return "DegenerateShot";
    if (dynamic_cast<const RayLeavesDomain*>(&e)) return "RayLeavesDomain";
    if (dynamic_cast<const InvalidArgument*>(&e)) return "InvalidArgument";
    return "Error";
}

inline StudyRecord run_one_eps(double eps, const std::function<double(double)>& h0,
                               const SolverConfig& cfg, const StudyOptions& opts) {
    const double spacing = opts.spacing_factor * eps;
    double depth = opts.depth;
    for (int attempt = 1;; ++attempt) {
        const Grid grid = make_grid_for_spacing(depth, spacing);
        if (grid.d_eta() > eps || grid.d_theta() > eps) {
            throw InvalidArgument("study grid violates the resolution gate for eps = " + std::to_string(eps));
        }
        Shooter classical(EquationKind::classical(), grid, cfg);
        Shooter milne(EquationKind::milne(eps), grid, cfg);
        const std::vector<double> inlet = classical.sample_inlet(h0);
        MatchedSolution a = classical.shoot_unchecked(inlet);
        MatchedSolution b = milne.shoot_unchecked(inlet);
        const double worst = std::max(a.constancy_residual, b.constancy_residual);
        if (worst > cfg.lambda_const_tol) {
            if (attempt >= opts.max_attempts) throw DomainTooSmall(worst, depth);
            depth *= cfg.r_growth;
            continue;
        }
        StudyRecord r;
        r.eps = eps;
        r.depth = grid.depth();
        r.n_eta = grid.n_eta();
        r.n_theta = grid.n_theta();
        r.d_eta = grid.d_eta();
        r.d_theta = grid.d_theta();
        r.errors = error_norms(b.f, a.f);
        r.lam_classical = a.lam;
        r.lam_milne = b.lam;
        r.lambda_gap = std::abs(a.lam - b.lam);
        r.constancy_classical = a.constancy_residual;
        r.constancy_milne = b.constancy_residual;
        r.conservation_classical = conservation_diagnostics(a, EquationKind::classical());
        r.conservation_milne = conservation_diagnostics(b, EquationKind::milne(eps));
        r.iterations_classical = a.f1_stats.iterations + a.f2_stats.iterations;
        r.iterations_milne = b.f1_stats.iterations + b.f2_stats.iterations;
        if (opts.ray) {
            // The ray is cut where it would leave the strip or pass theta = pi.
            const double reach = std::min(grid.depth(), std::numbers::pi);
            const auto fits = static_cast<std::size_t>(std::floor(reach / eps + 1e-9));
            r.ray = ray_error(b.f, a.f, eps, std::min(opts.ray_n_max, fits));
        }
        return r;
    }
}

}  // namespace detail

/// Runs every eps independently on up to opts.workers threads. Per-eps failures are
/// collected in the report instead of aborting the sweep.
inline StudyReport convergence_study(const std::vector<double>& eps_list,
                                     const std::function<double(double)>& h0, const SolverConfig& cfg,
                                     const StudyOptions& opts = {}) {
    if (eps_list.empty()) throw InvalidArgument("convergence_study: empty eps list");
    for (double e : eps_list) {
        if (!(e > 0.0 && e < 1.0)) throw InvalidArgument("convergence_study: eps must lie in (0, 1)");
    }
    if (!(opts.spacing_factor > 0.0 && opts.spacing_factor <= 1.0)) {
        throw InvalidArgument("convergence_study: spacing factor must lie in (0, 1]");
    }
    if (!(opts.depth > 0.0)) throw InvalidArgument("convergence_study: depth must be positive");
    cfg.validate();

    const std::size_t n = eps_list.size();
    std::vector<std::optional<StudyRecord>> results(n);
    std::vector<std::optional<StudyFailure>> failures(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                results[k] = detail::run_one_eps(eps_list[k], h0, cfg, opts);
            } catch (const std::exception& e) {
                failures[k] = StudyFailure{eps_list[k], detail::error_name(e), e.what()};
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(opts.workers, 1, n);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    StudyReport report;
    report.eps_list = eps_list;
    for (std::size_t k = 0; k < n; ++k) {
        if (results[k]) report.records.push_back(std::move(*results[k]));
        if (failures[k]) report.failures.push_back(std::move(*failures[k]));
    }
    std::vector<double> eps, l2, lr, ld, gap, defect;
    for (const auto& r : report.records) {
        eps.push_back(r.eps);
        l2.push_back(r.errors.l2);
        lr.push_back(r.errors.linf_at_R);
        ld.push_back(r.errors.linf_domain);
        gap.push_back(r.lambda_gap);
        defect.push_back(r.conservation_milne.defect);
    }
    report.slopes = {fit_slope(eps, l2), fit_slope(eps, lr), fit_slope(eps, ld), fit_slope(eps, gap),
                     fit_slope(eps, defect)};
    return report;
}

}  // namespace milne

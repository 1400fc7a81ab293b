#pragma once

#include "errors.hpp"
#include "gmres.hpp"
#include "grid.hpp"
#include "halfspace.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace milne {

enum class Preconditioner {
    /// Exact inverse of the transport part by an ordered sweep. Krylov then runs on
    /// the per-level angular averages only (one scalar per eta node).
    Sweep,
    /// Left/right diagonal scaling of the full system.
    Jacobi,
    None,
};

struct SolverConfig {
    double krylov_tol = 1e-10;
    /// 0 selects 10 x (dimension of the iterated system).
    std::size_t max_iters = 0;
    std::size_t restart = 100;
    double r_growth = 1.5;
    double lambda_const_tol = 1e-3;
    Preconditioner preconditioner = Preconditioner::Sweep;

    void validate() const {
        if (!(krylov_tol > 0.0 && krylov_tol < 1.0)) {
            throw InvalidArgument("SolverConfig: krylov_tol must lie in (0, 1)");
        }
        if (restart == 0) throw InvalidArgument("SolverConfig: restart must be positive");
        if (!(r_growth > 1.0)) throw InvalidArgument("SolverConfig: r_growth must exceed 1");
        if (!(lambda_const_tol > 0.0)) {
            throw InvalidArgument("SolverConfig: lambda_const_tol must be positive");
        }
    }
};

struct HalfSpaceProblem {
    EquationKind kind;
    Grid grid;
    IncomingData incoming;
};

struct SolveStats {
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

struct SolveOutput {
    Field f;
    SolveStats stats;
};

namespace detail {

inline double norm2(const std::vector<double>& v) { return norm2(std::span<const double>(v)); }

// Krylov on the level averages: rho = Avg L^{-1}(b + B rho). Rows are scaled by
// sqrt(free rows per level) so the reduced residual norm equals the full one.
inline SolveOutput solve_with_sweep(const TransportOperator& op, const std::vector<double>& b,
                                    const SolverConfig& cfg) {
    const Grid& g = op.grid();
    const std::size_t levels = g.eta_count();
    const std::size_t nt = g.n_theta();
    std::vector<double> weight(levels);
    for (std::size_t i = 0; i < levels; ++i) weight[i] = std::sqrt(static_cast<double>(op.free_rows(i)));

    std::vector<double> work(op.size()), swept(op.size());
    auto level_averages = [&](const std::vector<double>& field, std::span<double> out) {
        for (std::size_t i = 0; i < levels; ++i) {
            out[i] = angular_average(std::span<const double>(field).subspan(i * nt, nt));
        }
    };
    auto broadcast = [&](std::span<const double> rho, std::vector<double>& out) {
        for (std::size_t i = 0; i < levels; ++i) {
            for (std::size_t j = 0; j < nt; ++j) {
                out[i * nt + j] = op.is_dirichlet(i, j) ? 0.0 : rho[i];
            }
        }
    };

    op.sweep(b, swept);
    std::vector<double> rhs(levels);
    level_averages(swept, rhs);
    for (std::size_t i = 0; i < levels; ++i) rhs[i] *= weight[i];

    std::vector<double> rho(levels);
    auto apply = [&](std::span<const double> y, std::span<double> out) {
        for (std::size_t i = 0; i < levels; ++i) rho[i] = y[i] / weight[i];
        broadcast(rho, work);
        op.sweep(work, swept);
        level_averages(swept, out);
        for (std::size_t i = 0; i < levels; ++i) out[i] = y[i] - weight[i] * out[i];
    };
    auto identity = [](std::span<const double> in, std::span<double> out) {
        std::copy(in.begin(), in.end(), out.begin());
    };

    const double bnorm = norm2(b);
    const double rnorm = norm2(rhs);
    SolveOutput result{Field(g), {}};
    if (bnorm == 0.0) return result;

    GmresOptions opts;
    opts.restart = cfg.restart;
    opts.max_iters = cfg.max_iters ? cfg.max_iters : 10 * levels;
    opts.rel_tol = rnorm > 0.0 ? cfg.krylov_tol * bnorm / rnorm : cfg.krylov_tol;
    std::vector<double> y(levels, 0.0);
    GmresResult gr = gmres(apply, identity, rhs, y, opts);

    for (std::size_t i = 0; i < levels; ++i) rho[i] = y[i] / weight[i];
    broadcast(rho, work);
    for (std::size_t k = 0; k < work.size(); ++k) work[k] += b[k];
    op.sweep(work, result.f.storage());

    op.apply(result.f.values(), work);
    for (std::size_t k = 0; k < work.size(); ++k) work[k] -= b[k];
    result.stats = {gr.iterations, norm2(work) / bnorm};
    if (!gr.converged) {
        throw NonConvergence(gr.iterations, result.stats.relative_residual);
    }
    return result;
}

inline SolveOutput solve_full_space(const TransportOperator& op, const std::vector<double>& b,
                                    const SolverConfig& cfg) {
    std::vector<double> inv_diag;
    if (cfg.preconditioner == Preconditioner::Jacobi) {
        inv_diag = op.diagonal();
        for (double& d : inv_diag) d = 1.0 / d;
    }
    auto apply = [&](std::span<const double> in, std::span<double> out) { op.apply(in, out); };
    auto precond = [&](std::span<const double> in, std::span<double> out) {
        if (inv_diag.empty()) {
            std::copy(in.begin(), in.end(), out.begin());
        } else {
            for (std::size_t k = 0; k < in.size(); ++k) out[k] = inv_diag[k] * in[k];
        }
    };
    GmresOptions opts;
    opts.rel_tol = cfg.krylov_tol;
    opts.restart = cfg.restart;
    opts.max_iters = cfg.max_iters ? cfg.max_iters : 10 * op.size();
    SolveOutput result{Field(op.grid()), {}};
    GmresResult gr = gmres(apply, precond, b, result.f.values(), opts);
    result.stats = {gr.iterations, gr.relative_residual};
    if (!gr.converged) {
        throw NonConvergence(gr.iterations, gr.relative_residual);
    }
    return result;
}

inline SolveOutput solve_with(const TransportOperator& op, const IncomingData& data,
                              const SolverConfig& cfg) {
    cfg.validate();
    data.validate(op.grid());
    const std::vector<double> b = boundary_rhs(op.grid(), data);
    if (cfg.preconditioner == Preconditioner::Sweep) {
        return solve_with_sweep(op, b, cfg);
    }
    return solve_full_space(op, b, cfg);
}

}  // namespace detail

/// Solves the discrete boundary-value problem matrix-free from a zero initial guess.
/// Throws NonConvergence when the iteration cap is exhausted.
inline SolveOutput solve_bvp_detailed(const HalfSpaceProblem& problem, const SolverConfig& cfg) {
    TransportOperator op(problem.kind, problem.grid);
    return detail::solve_with(op, problem.incoming, cfg);
}

inline Field solve_bvp(const HalfSpaceProblem& problem, const SolverConfig& cfg) {
    return solve_bvp_detailed(problem, cfg).f;
}

/// Dense reference solve: the system matrix is probed column by column from the
/// operator and factorized with partial pivoting.
inline Field dense_oracle_solve(const HalfSpaceProblem& problem, std::size_t max_unknowns = 20000) {
    const Grid& g = problem.grid;
    problem.incoming.validate(g);
    const std::size_t n = g.node_count();
    if (n > max_unknowns) {
        throw SizeGuard("dense_oracle_solve: " + std::to_string(n) + " unknowns exceeds guard of " +
                        std::to_string(max_unknowns));
    }
    TransportOperator op(problem.kind, g);
    std::vector<double> a(n * n);
    std::vector<double> unit(n, 0.0), column(n);
    for (std::size_t c = 0; c < n; ++c) {
        unit[c] = 1.0;
        op.apply(unit, column);
        unit[c] = 0.0;
        for (std::size_t r = 0; r < n; ++r) a[r * n + c] = column[r];
    }
    std::vector<double> x = boundary_rhs(g, problem.incoming);

    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < n; ++r) {
            if (std::abs(a[r * n + k]) > std::abs(a[piv * n + k])) piv = r;
        }
        if (std::abs(a[piv * n + k]) <= 1e-14 * scale) {
            throw SingularMatrix("dense_oracle_solve: zero pivot in column " + std::to_string(k));
        }
        if (piv != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a[k * n + c], a[piv * n + c]);
            std::swap(x[k], x[piv]);
        }
        const double inv = 1.0 / a[k * n + k];
        for (std::size_t r = k + 1; r < n; ++r) {
            const double m = a[r * n + k] * inv;
            if (m == 0.0) continue;
            for (std::size_t c = k; c < n; ++c) a[r * n + c] -= m * a[k * n + c];
            x[r] -= m * x[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double s = x[k];
        for (std::size_t c = k + 1; c < n; ++c) s -= a[k * n + c] * x[c];
        x[k] = s / a[k * n + k];
    }
    return Field(g, std::move(x));
}

/// Double-shot solution f = f1 + lam f2 with its end state.
struct MatchedSolution {
    Field f;
    double lam = 0.0;
    /// max over the eta = R row of |f(R, .) - lam|.
    double constancy_residual = 0.0;
    Field f1;
    Field f2;
    SolveStats f1_stats;
    SolveStats f2_stats;
};

/// Solves the two complementary truncated problems of the shooting procedure.
///
/// f1 carries the inlet data with zero outlet data; f2 has zero inlet data and unit
/// outlet data. f2 depends only on (kind, grid), so it is solved once and reused
/// across every shot made with the same Shooter.
class Shooter {
public:
    Shooter(EquationKind kind, Grid grid, SolverConfig cfg)
        : cfg_(cfg), op_(std::make_shared<TransportOperator>(kind, grid)) {
        cfg_.validate();
    }

    const Grid& grid() const { return op_->grid(); }
    const EquationKind& kind() const { return op_->kind(); }
    const SolverConfig& config() const { return cfg_; }

    /// Shoots without enforcing lambda_const_tol.
    MatchedSolution shoot_unchecked(const std::vector<double>& inlet) {
        const Grid& g = grid();
        const std::size_t half = g.n_theta() / 2;
        if (inlet.size() != half) {
            throw GridMismatch("double_shoot: inlet data does not match the grid");
        }
        ensure_unit_shot();
        SolveOutput first = detail::solve_with(*op_, {inlet, std::vector<double>(half, 0.0)}, cfg_);

        MatchedSolution sol;
        sol.f1 = std::move(first.f);
        sol.f1_stats = first.stats;
        sol.f2 = unit_shot_->f;
        sol.f2_stats = unit_shot_->stats;

        // At eta = R the outgoing nodes (sin > 0) are the solved ones.
        const std::size_t last = g.n_eta();
        double max_gap = 0.0;
        for (std::size_t j = half; j < g.n_theta(); ++j) {
            max_gap = std::max(max_gap, std::abs(1.0 - sol.f2.at(last, j)));
        }
        if (max_gap < 1e-8) {
            throw DegenerateShot("double_shoot: 1 - f2 vanishes on the outlet trace");
        }
        double sum = 0.0;
        for (std::size_t j = half; j < g.n_theta(); ++j) {
            sum += sol.f1.at(last, j) / (1.0 - sol.f2.at(last, j));
        }
        sol.lam = sum / static_cast<double>(half);
        sol.f = combine(1.0, sol.f1, sol.lam, sol.f2);
        double residual = 0.0;
        for (std::size_t j = 0; j < g.n_theta(); ++j) {
            residual = std::max(residual, std::abs(sol.f.at(last, j) - sol.lam));
        }
        sol.constancy_residual = residual;
        return sol;
    }

    /// Throws DomainTooSmall when the far trace varies more than lambda_const_tol.
    MatchedSolution shoot(const std::vector<double>& inlet) {
        MatchedSolution sol = shoot_unchecked(inlet);
        if (sol.constancy_residual > cfg_.lambda_const_tol) {
            throw DomainTooSmall(sol.constancy_residual, grid().depth());
        }
        return sol;
    }

    /// Samples an inlet profile h0(theta) on the sin > 0 nodes.
    std::vector<double> sample_inlet(const std::function<double(double)>& h0) const {
        const Grid& g = grid();
        std::vector<double> v(g.n_theta() / 2);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = h0(g.theta(g.first_positive() + k));
        return v;
    }

private:
    void ensure_unit_shot() {
        if (!unit_shot_) {
            unit_shot_ = detail::solve_with(*op_, IncomingData::constant(grid(), 0.0, 1.0), cfg_);
        }
    }

    SolverConfig cfg_;
    std::shared_ptr<const TransportOperator> op_;
    std::optional<SolveOutput> unit_shot_;
};

inline MatchedSolution double_shoot(const EquationKind& kind, const std::vector<double>& h0,
                                    const Grid& grid, const SolverConfig& cfg) {
    Shooter shooter(kind, grid, cfg);
    return shooter.shoot(h0);
}

/// Re-solves on R <- r_growth * R (same spacing) until the end state is constant.
inline MatchedSolution double_shoot_with_retry(const EquationKind& kind,
                                               const std::function<double(double)>& h0,
                                               const Grid& grid, const SolverConfig& cfg,
                                               int max_attempts = 4) {
    Grid g = grid;
    for (int attempt = 1;; ++attempt) {
        Shooter shooter(kind, g, cfg);
        MatchedSolution sol = shooter.shoot_unchecked(shooter.sample_inlet(h0));
        if (sol.constancy_residual <= cfg.lambda_const_tol) return sol;
        if (attempt >= max_attempts) {
            throw DomainTooSmall(sol.constancy_residual, g.depth());
        }
        const double depth = g.depth() * cfg.r_growth;
        const auto n_eta = static_cast<std::size_t>(std::ceil(depth / g.d_eta() - 1e-9));
        g = make_grid(depth, n_eta, g.n_theta());
    }
}

/// Extrapolated end state of a matched solution.
inline double end_state(const MatchedSolution& sol, double lambda_const_tol = 1e-3) {
    if (!(sol.constancy_residual <= lambda_const_tol)) {
        throw NotMatched("end_state: constancy residual " + std::to_string(sol.constancy_residual) +
                         " exceeds " + std::to_string(lambda_const_tol));
    }
    return sol.lam;
}

}  // namespace milne

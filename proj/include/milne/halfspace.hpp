#pragma once

// Discrete classical and eps-Milne half-space transport operators.
//
//   classical:  sin(theta) d_eta f + f - <f> = 0
//   eps-Milne:  sin(theta) d_eta f - k(eta) cos(theta) d_theta f + f - <f> = 0,
//               k(eta) = eps psi(eps eta) / (1 - eps eta)
//
// Both derivatives are first-order upwind. Incoming boundary nodes (eta = 0 with
// sin > 0, eta = R with sin < 0) carry identity rows f - g.

#include "errors.hpp"
#include "grid.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace milne {

struct EquationKind {
    enum class Type { Classical, EpsilonMilne };

    Type type = Type::Classical;
    double eps = 0.0;

    static EquationKind classical() { return {}; }
    static EquationKind milne(double eps) {
        if (!(eps > 0.0 && eps < 1.0)) {
            throw InvalidArgument("eps-Milne kind requires 0 < eps < 1");
        }
        return {Type::EpsilonMilne, eps};
    }

    bool is_milne() const { return type == Type::EpsilonMilne; }
};

/// Prescribed values on the incoming half of the theta nodes at each end.
///
/// at_inlet[k] belongs to node j = n_theta/2 + k (sin > 0, eta = 0);
/// at_outlet[k] belongs to node j = k (sin < 0, eta = R).
struct IncomingData {
    std::vector<double> at_inlet;
    std::vector<double> at_outlet;

    static IncomingData from_functions(const Grid& grid, const std::function<double(double)>& inlet,
                                       const std::function<double(double)>& outlet) {
        IncomingData d;
        const std::size_t half = grid.n_theta() / 2;
        d.at_inlet.resize(half);
        d.at_outlet.resize(half);
        for (std::size_t k = 0; k < half; ++k) {
            d.at_inlet[k] = inlet(grid.theta(half + k));
            d.at_outlet[k] = outlet(grid.theta(k));
        }
        return d;
    }

    static IncomingData constant(const Grid& grid, double inlet, double outlet) {
        const std::size_t half = grid.n_theta() / 2;
        return {std::vector<double>(half, inlet), std::vector<double>(half, outlet)};
    }

    void validate(const Grid& grid) const {
        const std::size_t half = grid.n_theta() / 2;
        if (at_inlet.size() != half || at_outlet.size() != half) {
            throw GridMismatch("IncomingData does not match the grid's incoming node sets");
        }
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(at_inlet.begin(), at_inlet.end(), finite) ||
            !std::all_of(at_outlet.begin(), at_outlet.end(), finite)) {
            throw InvalidArgument("IncomingData contains non-finite values");
        }
    }
};

/// Smooth cutoff: 1 on [0, 1/2], 0 on [3/4, inf), quintic smoothstep in between.
inline double cutoff_psi(double r) {
    if (r < 0.0 || std::isnan(r)) {
        throw InvalidArgument("cutoff_psi: argument must be non-negative");
    }
    if (r <= 0.5) return 1.0;
    if (r >= 0.75) return 0.0;
    const double t = (r - 0.5) / 0.25;
    return 1.0 - t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

namespace detail {

inline double cutoff_ratio(double x) { return cutoff_psi(x) / (1.0 - x); }

// integral_0^x psi(s)/(1-s) ds, split at the plateau edge where psi is only C^2.
inline double cutoff_integral(double x) {
    using boost::math::quadrature::gauss_kronrod;
    x = std::min(x, 0.75);
    if (x <= 0.0) return 0.0;
    double sum = gauss_kronrod<double, 31>::integrate(cutoff_ratio, 0.0, std::min(x, 0.5), 15, 1e-14);
    if (x > 0.5) {
        sum += gauss_kronrod<double, 31>::integrate(cutoff_ratio, 0.5, x, 15, 1e-14);
    }
    return sum;
}

}  // namespace detail

/// V_infinity = integral_0^inf psi(x)/(1-x) dx; depends only on the cutoff.
inline double v_infinity() {
    static const double value = detail::cutoff_integral(0.75);
    return value;
}

/// V_eps(eta) = integral_0^eta eps psi(eps t)/(1 - eps t) dt.
inline double v_eps(double eta, double eps) {
    if (eta < 0.0 || !(eps > 0.0)) {
        throw InvalidArgument("v_eps: need eta >= 0 and eps > 0");
    }
    const double x = eps * eta;
    if (x >= 0.75) return v_infinity();
    return detail::cutoff_integral(x);
}

/// Coefficient k(eta) of the geometric term; zero outside the cutoff support.
inline double milne_coefficient(double eta, double eps) {
    const double x = eps * eta;
    const double p = cutoff_psi(x);
    if (p == 0.0) return 0.0;
    if (!(x < 1.0)) {
        throw InvalidArgument("milne_coefficient: eps*eta >= 1 inside cutoff support");
    }
    return eps * p / (1.0 - x);
}

/// Precomputed upwind stencil of the discrete operator on one grid.
///
/// The operator splits as A = L - S, where S f broadcasts the level average <f>_i
/// onto non-Dirichlet rows and L holds everything else. L is inverted exactly by
/// one ordered sweep: outgoing-at-R nodes forward in eta, then the rest backward.
/// Within a level the theta upwind graph flows away from theta = pi/2 and into
/// theta = -pi/2, so it is acyclic except for the pair straddling pi/2.
class TransportOperator {
public:
    TransportOperator(const EquationKind& kind, const Grid& grid) : kind_(kind), grid_(grid) {
        if (kind.is_milne() && !(kind.eps > 0.0)) {
            throw InvalidArgument("eps-Milne operator requires eps > 0");
        }
        const std::size_t nt = grid.n_theta();
        inv_deta_ = 1.0 / grid.d_eta();
        kappa_.assign(grid.eta_count(), 0.0);
        if (kind.is_milne()) {
            for (std::size_t i = 0; i < grid.eta_count(); ++i) {
                kappa_[i] = milne_coefficient(grid.eta(i), kind.eps);
            }
        }
        up_.assign(nt, kNone);
        theta_weight_.assign(nt, 0.0);
        for (std::size_t j = 0; j < nt; ++j) {
            const double c = grid.cos_theta(j);
            // a = -k cos: a > 0 (cos < 0) takes the backward neighbour, a < 0 the forward one.
            if (c < 0.0) {
                up_[j] = (j + nt - 1) % nt;
            } else if (c > 0.0) {
                up_[j] = (j + 1) % nt;
            }
            theta_weight_[j] = std::abs(c) / grid.d_theta();
        }
        build_order(grid.first_positive(), nt, positive_blocks_);
        build_order(0, grid.first_positive(), negative_blocks_);
    }

    const Grid& grid() const { return grid_; }
    const EquationKind& kind() const { return kind_; }
    std::size_t size() const { return grid_.node_count(); }

    bool is_dirichlet(std::size_t i, std::size_t j) const {
        return grid_.incoming_at_inlet(j) ? i == 0 : i == grid_.n_eta();
    }

    /// Number of non-Dirichlet rows on level i.
    std::size_t free_rows(std::size_t i) const {
        return (i == 0 || i == grid_.n_eta()) ? grid_.n_theta() / 2 : grid_.n_theta();
    }

    /// out = A x (homogeneous boundary rows).
    void apply(std::span<const double> x, std::span<double> out) const {
        apply_transport(x, out);
        const std::size_t nt = grid_.n_theta();
        for (std::size_t i = 0; i < grid_.eta_count(); ++i) {
            const double avg = angular_average(x.subspan(i * nt, nt));
            for (std::size_t j = 0; j < nt; ++j) {
                if (!is_dirichlet(i, j)) out[i * nt + j] -= avg;
            }
        }
    }

    /// out = L x: A without the scattering average.
    void apply_transport(std::span<const double> x, std::span<double> out) const {
        const std::size_t nt = grid_.n_theta();
        const std::size_t ne = grid_.n_eta();
        for (std::size_t i = 0; i <= ne; ++i) {
            const double k = kappa_[i];
            const double* xi = x.data() + i * nt;
            double* oi = out.data() + i * nt;
            for (std::size_t j = 0; j < nt; ++j) {
                if (is_dirichlet(i, j)) {
                    oi[j] = xi[j];
                    continue;
                }
                const double s = grid_.sin_theta(j);
                const double se = std::abs(s) * inv_deta_;
                const double neighbour = s > 0.0 ? xi[j - nt] : xi[j + nt];
                double v = se * (xi[j] - neighbour) + xi[j];
                if (k != 0.0 && up_[j] != kNone) {
                    v += k * theta_weight_[j] * (xi[j] - xi[up_[j]]);
                }
                oi[j] = v;
            }
        }
    }

    /// Diagonal of A, for Jacobi scaling.
    std::vector<double> diagonal() const {
        const std::size_t nt = grid_.n_theta();
        std::vector<double> d(size(), 1.0);
        const double self = 1.0 / static_cast<double>(nt);
        for (std::size_t i = 0; i < grid_.eta_count(); ++i) {
            for (std::size_t j = 0; j < nt; ++j) {
                if (is_dirichlet(i, j)) continue;
                double v = std::abs(grid_.sin_theta(j)) * inv_deta_ + 1.0 - self;
                if (kappa_[i] != 0.0 && up_[j] != kNone) v += kappa_[i] * theta_weight_[j];
                d[grid_.index(i, j)] = v;
            }
        }
        return d;
    }

    /// out = L^{-1} q by one ordered sweep.
    void sweep(std::span<const double> q, std::span<double> out) const {
        const std::size_t ne = grid_.n_eta();
        for (std::size_t i = 0; i <= ne; ++i) {
            sweep_level(i, q, out, positive_blocks_, i == 0, i > 0 ? i - 1 : 0);
        }
        for (std::size_t i = ne + 1; i-- > 0;) {
            sweep_level(i, q, out, negative_blocks_, i == ne, i < ne ? i + 1 : ne);
        }
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    // One or two theta nodes solved together within a level.
    struct Block {
        std::size_t a;
        std::size_t b;  // kNone for a single node
    };

    bool in_range(std::size_t j, std::size_t lo, std::size_t hi) const { return j >= lo && j < hi; }

    void build_order(std::size_t lo, std::size_t hi, std::vector<Block>& blocks) {
        const std::size_t nt = grid_.n_theta();
        std::vector<char> done(nt, 0);
        std::vector<std::size_t> stack;
        for (std::size_t start = lo; start < hi; ++start) {
            if (done[start]) continue;
            stack.push_back(start);
            while (!stack.empty()) {
                const std::size_t j = stack.back();
                if (done[j]) {
                    stack.pop_back();
                    continue;
                }
                const std::size_t u = up_[j];
                if (u == kNone || !in_range(u, lo, hi) || done[u]) {
                    blocks.push_back({j, kNone});
                    done[j] = 1;
                    stack.pop_back();
                } else if (up_[u] == j) {
                    blocks.push_back({j, u});
                    done[j] = done[u] = 1;
                    stack.pop_back();
                } else {
                    stack.push_back(u);
                }
            }
        }
    }

    void sweep_level(std::size_t i, std::span<const double> q, std::span<double> out,
                     const std::vector<Block>& blocks, bool dirichlet, std::size_t prev) const {
        const std::size_t nt = grid_.n_theta();
        const double k = kappa_[i];
        const double* qi = q.data() + i * nt;
        double* oi = out.data() + i * nt;
        const double* op = out.data() + prev * nt;
        if (dirichlet) {
            for (const Block& blk : blocks) {
                oi[blk.a] = qi[blk.a];
                if (blk.b != kNone) oi[blk.b] = qi[blk.b];
            }
            return;
        }
        auto coeffs = [&](std::size_t j, double& diag, double& rhs, double& w) {
            const double se = std::abs(grid_.sin_theta(j)) * inv_deta_;
            w = (k != 0.0 && up_[j] != kNone) ? k * theta_weight_[j] : 0.0;
            diag = se + 1.0 + w;
            rhs = qi[j] + se * op[j];
        };
        for (const Block& blk : blocks) {
            double da, ra, wa;
            coeffs(blk.a, da, ra, wa);
            if (blk.b == kNone) {
                if (wa != 0.0) ra += wa * oi[up_[blk.a]];
                oi[blk.a] = ra / da;
            } else {
                double db, rb, wb;
                coeffs(blk.b, db, rb, wb);
                // da fa - wa fb = ra ; db fb - wb fa = rb
                const double det = da * db - wa * wb;
                oi[blk.a] = (ra * db + wa * rb) / det;
                oi[blk.b] = (rb * da + wb * ra) / det;
            }
        }
    }

    EquationKind kind_;
    Grid grid_;
    double inv_deta_ = 0.0;
    std::vector<double> kappa_;
    std::vector<std::size_t> up_;
    std::vector<double> theta_weight_;
    std::vector<Block> positive_blocks_;
    std::vector<Block> negative_blocks_;
};

/// Overwrites the incoming boundary nodes of f with the prescribed data.
inline Field impose_boundary(Field f, const IncomingData& data) {
    const Grid& g = f.grid();
    data.validate(g);
    const std::size_t half = g.n_theta() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        f.at(0, half + k) = data.at_inlet[k];
        f.at(g.n_eta(), k) = data.at_outlet[k];
    }
    return f;
}

/// Dirichlet part of the right-hand side: g on incoming boundary rows, 0 elsewhere.
inline std::vector<double> boundary_rhs(const Grid& grid, const IncomingData& data) {
    return impose_boundary(Field(grid), data).storage();
}

/// Residual A f - b of the discrete boundary-value problem.
inline Field apply_operator(const EquationKind& kind, const Field& f, const IncomingData& data) {
    data.validate(f.grid());
    TransportOperator op(kind, f.grid());
    Field r(f.grid());
    op.apply(f.values(), r.values());
    const std::size_t half = f.grid().n_theta() / 2;
    for (std::size_t k = 0; k < half; ++k) {
        r.at(0, half + k) -= data.at_inlet[k];
        r.at(f.grid().n_eta(), k) -= data.at_outlet[k];
    }
    return r;
}

/// Residual with homogeneous (zero) incoming data.
inline Field apply_operator(const EquationKind& kind, const Field& f) {
    return apply_operator(kind, f, IncomingData::constant(f.grid(), 0.0, 0.0));
}

}  // namespace milne

#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace milne {

/// Truncated half-space strip [0, R] x (-pi, pi).
///
/// eta nodes are vertex-centred (both eta = 0 and eta = R are nodes), theta
/// nodes are cell-centred on the periodic circle, theta_j = -pi + (j + 1/2) dtheta.
/// With an even node count the set is symmetric under theta -> -theta and no node
/// has sin(theta) = 0, so every node is either incoming or outgoing at each end.
class Grid {
public:
    Grid() = default;

    double depth() const { return depth_; }
    std::size_t n_eta() const { return n_eta_; }
    std::size_t n_theta() const { return n_theta_; }
    double d_eta() const { return d_eta_; }
    double d_theta() const { return d_theta_; }

    std::span<const double> eta_nodes() const { return eta_; }
    std::span<const double> theta_nodes() const { return theta_; }
    double eta(std::size_t i) const { return eta_[i]; }
    double theta(std::size_t j) const { return theta_[j]; }
    double sin_theta(std::size_t j) const { return sin_[j]; }
    /// cos(theta_j), with values below 1e-12 in magnitude snapped to exactly 0.
    double cos_theta(std::size_t j) const { return cos_[j]; }

    std::size_t eta_count() const { return n_eta_ + 1; }
    std::size_t node_count() const { return eta_count() * n_theta_; }
    std::size_t index(std::size_t i, std::size_t j) const { return i * n_theta_ + j; }

    /// theta nodes with sin(theta) > 0 are j = n_theta/2 .. n_theta-1.
    std::size_t first_positive() const { return n_theta_ / 2; }
    bool incoming_at_inlet(std::size_t j) const { return j >= n_theta_ / 2; }

    /// Identity of the discretization (node arrays are a pure function of these).
    bool same_as(const Grid& other) const {
        return depth_ == other.depth_ && n_eta_ == other.n_eta_ && n_theta_ == other.n_theta_;
    }

    friend Grid make_grid(double depth, std::size_t n_eta, std::size_t n_theta);

private:
    double depth_ = 0.0;
    std::size_t n_eta_ = 0;
    std::size_t n_theta_ = 0;
    double d_eta_ = 0.0;
    double d_theta_ = 0.0;
    std::vector<double> eta_;
    std::vector<double> theta_;
    std::vector<double> sin_;
    std::vector<double> cos_;
};

inline Grid make_grid(double depth, std::size_t n_eta, std::size_t n_theta) {
    if (!(depth > 0.0) || !std::isfinite(depth)) {
        throw InvalidArgument("make_grid: strip depth R must be positive and finite");
    }
    if (n_eta < 2) {
        throw InvalidArgument("make_grid: n_eta must be at least 2");
    }
    if (n_theta < 4) {
        throw InvalidArgument("make_grid: n_theta must be at least 4");
    }
    if (n_theta % 2 != 0) {
        throw InvalidArgument("make_grid: n_theta must be even");
    }
    constexpr double pi = std::numbers::pi;
    Grid g;
    g.depth_ = depth;
    g.n_eta_ = n_eta;
    g.n_theta_ = n_theta;
    g.d_eta_ = depth / static_cast<double>(n_eta);
    g.d_theta_ = 2.0 * pi / static_cast<double>(n_theta);
    g.eta_.resize(n_eta + 1);
    for (std::size_t i = 0; i <= n_eta; ++i) {
        g.eta_[i] = static_cast<double>(i) * g.d_eta_;
    }
    g.eta_[n_eta] = depth;
    g.theta_.resize(n_theta);
    g.sin_.resize(n_theta);
    g.cos_.resize(n_theta);
    // Build the upper half and mirror it, so theta_{n-1-j} = -theta_j bit-exactly.
    const std::size_t half = n_theta / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double t = (static_cast<double>(k) + 0.5) * g.d_theta_;
        g.theta_[half + k] = t;
        g.theta_[half - 1 - k] = -t;
        const double s = std::sin(t);
        double c = std::cos(t);
        if (std::abs(c) < 1e-12) {
            c = 0.0;
        }
        g.sin_[half + k] = s;
        g.sin_[half - 1 - k] = -s;
        g.cos_[half + k] = c;
        g.cos_[half - 1 - k] = c;
    }
    return g;
}

/// Smallest n_eta and smallest n_theta divisible by 4 giving spacings no larger than
/// `spacing`. A multiple of 4 also makes the node set symmetric under theta -> pi - theta
/// with no node on theta = +-pi/2.
inline Grid make_grid_for_spacing(double depth, double spacing) {
    if (!(spacing > 0.0)) {
        throw InvalidArgument("make_grid_for_spacing: spacing must be positive");
    }
    constexpr double pi = std::numbers::pi;
    auto n_eta = static_cast<std::size_t>(std::ceil(depth / spacing - 1e-9));
    auto n_theta = static_cast<std::size_t>(std::ceil(2.0 * pi / spacing - 1e-9));
    n_theta = (n_theta + 3) / 4 * 4;
    return make_grid(depth, std::max<std::size_t>(n_eta, 2), std::max<std::size_t>(n_theta, 4));
}

/// Scalar kinetic density sampled on every node of a Grid, row-major in (eta, theta).
class Field {
public:
    Field() = default;
    explicit Field(Grid grid, double fill = 0.0)
        : grid_(std::move(grid)), values_(grid_.node_count(), fill) {}
    Field(Grid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
        if (values_.size() != grid_.node_count()) {
            throw GridMismatch("Field: value count does not match grid");
        }
    }

    template <typename Fn>
    static Field from_function(const Grid& grid, Fn&& fn) {
        Field f(grid);
        for (std::size_t i = 0; i < grid.eta_count(); ++i) {
            for (std::size_t j = 0; j < grid.n_theta(); ++j) {
                f.at(i, j) = fn(grid.eta(i), grid.theta(j));
            }
        }
        return f;
    }

    const Grid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::vector<double>& storage() { return values_; }

    double& at(std::size_t i, std::size_t j) { return values_[grid_.index(i, j)]; }
    double at(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(values_).subspan(i * grid_.n_theta(), grid_.n_theta());
    }
    std::span<double> row(std::size_t i) {
        return std::span<double>(values_).subspan(i * grid_.n_theta(), grid_.n_theta());
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

private:
    Grid grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const Field& a, const Field& b, const char* where) {
    if (!a.grid().same_as(b.grid())) {
        throw GridMismatch(std::string(where) + ": fields live on different grids");
    }
}

/// a*x + b*y on a shared grid.
inline Field combine(double a, const Field& x, double b, const Field& y) {
    require_same_grid(x, y, "combine");
    Field out(x.grid());
    auto xs = x.values();
    auto ys = y.values();
    auto os = out.values();
    for (std::size_t k = 0; k < os.size(); ++k) {
        os[k] = a * xs[k] + b * ys[k];
    }
    return out;
}

inline void check_eta_index(const Grid& grid, std::size_t eta_index) {
    if (eta_index >= grid.eta_count()) {
        throw InvalidArgument("eta index " + std::to_string(eta_index) + " out of range");
    }
}

/// Midpoint quadrature of (1/2pi) * integral over the circle of one eta row.
inline double angular_average(std::span<const double> row) {
    double sum = 0.0;
    for (double v : row) {
        sum += v;
    }
    return sum / static_cast<double>(row.size());
}

inline double angular_average(const Field& field, std::size_t eta_index) {
    check_eta_index(field.grid(), eta_index);
    return angular_average(field.row(eta_index));
}

enum class MomentWeight { Sin, Sin2, AbsSin };

/// Un-normalized moment dtheta * sum_j w(theta_j) f(eta_i, theta_j).
inline double weighted_moment(const Field& field, std::size_t eta_index, MomentWeight weight) {
    const Grid& g = field.grid();
    check_eta_index(g, eta_index);
    auto row = field.row(eta_index);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.n_theta(); ++j) {
        const double s = g.sin_theta(j);
        double w = 0.0;
        switch (weight) {
            case MomentWeight::Sin: w = s; break;
            case MomentWeight::Sin2: w = s * s; break;
            case MomentWeight::AbsSin: w = std::abs(s); break;
        }
        sum += w * row[j];
    }
    return g.d_theta() * sum;
}

}  // namespace milne

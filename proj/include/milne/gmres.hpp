#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace milne {

struct GmresOptions {
    double rel_tol = 1e-10;
    std::size_t restart = 100;
    std::size_t max_iters = 1000;
};

struct GmresResult {
    bool converged = false;
    std::size_t iterations = 0;
    /// ||b - A x|| / ||b|| at exit.
    double relative_residual = 0.0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

/// Restarted, right-preconditioned GMRES with modified Gram-Schmidt.
///
/// `apply(in, out)` computes out = A in; `precond(in, out)` computes out = M^{-1} in.
/// With right preconditioning the Arnoldi residual equals the unpreconditioned
/// residual ||b - A x||, so the stopping test is on the true residual.
/// x holds the initial guess on entry and the iterate on exit.
template <typename Apply, typename Precond>
GmresResult gmres(Apply&& apply, Precond&& precond, std::span<const double> b, std::span<double> x,
                  const GmresOptions& opts) {
    const std::size_t n = b.size();
    GmresResult result;
    const double bnorm = detail::norm2(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        result.converged = true;
        return result;
    }
    const std::size_t m = std::max<std::size_t>(1, std::min(opts.restart, n));
    std::vector<std::vector<double>> basis(m + 1, std::vector<double>(n));
    std::vector<double> hess((m + 1) * m, 0.0);
    auto H = [&](std::size_t row, std::size_t col) -> double& { return hess[row * m + col]; };
    std::vector<double> cs(m), sn(m), g(m + 1), y(m);
    std::vector<double> w(n), z(n), r(n);

    auto true_residual = [&]() {
        apply(std::span<const double>(x), std::span<double>(r));
        for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - r[k];
        return detail::norm2(r);
    };

    double rnorm = true_residual();
    while (true) {
        result.relative_residual = rnorm / bnorm;
        if (result.relative_residual <= opts.rel_tol) {
            result.converged = true;
            return result;
        }
        if (result.iterations >= opts.max_iters) {
            return result;
        }
        for (std::size_t k = 0; k < n; ++k) basis[0][k] = r[k] / rnorm;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = rnorm;
        std::size_t used = 0;
        for (std::size_t j = 0; j < m && result.iterations < opts.max_iters; ++j) {
            precond(std::span<const double>(basis[j]), std::span<double>(z));
            apply(std::span<const double>(z), std::span<double>(w));
            for (std::size_t i = 0; i <= j; ++i) {
                const double h = detail::dot(w, basis[i]);
                H(i, j) = h;
                for (std::size_t k = 0; k < n; ++k) w[k] -= h * basis[i][k];
            }
            const double wn = detail::norm2(w);
            H(j + 1, j) = wn;
            for (std::size_t i = 0; i < j; ++i) {
                const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            const double denom = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = denom == 0.0 ? 1.0 : H(j, j) / denom;
            sn[j] = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
            H(j, j) = denom;
            H(j + 1, j) = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            ++used;
            ++result.iterations;
            const bool breakdown = wn <= 1e-300;
            if (!breakdown) {
                for (std::size_t k = 0; k < n; ++k) basis[j + 1][k] = w[k] / wn;
            }
            if (std::abs(g[j + 1]) / bnorm <= opts.rel_tol || breakdown) {
                break;
            }
        }
        for (std::size_t i = used; i-- > 0;) {
            double s = g[i];
            for (std::size_t k = i + 1; k < used; ++k) s -= H(i, k) * y[k];
            y[i] = s / H(i, i);
        }
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t i = 0; i < used; ++i) {
            for (std::size_t k = 0; k < n; ++k) w[k] += y[i] * basis[i][k];
        }
        precond(std::span<const double>(w), std::span<double>(z));
        for (std::size_t k = 0; k < n; ++k) x[k] += z[k];
        const double previous = rnorm;
        rnorm = true_residual();
        if (rnorm >= previous && used < m && result.relative_residual > opts.rel_tol &&
            rnorm / bnorm > opts.rel_tol) {
            // Lucky breakdown that did not reduce the residual: nothing more to gain.
            result.relative_residual = rnorm / bnorm;
            return result;
        }
    }
}

}  // namespace milne

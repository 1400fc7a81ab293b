#pragma once

// Run configuration shared by the command-line front end and its tests.
// Config files are JSON objects whose keys are the field names below.

#include "errors.hpp"
#include "profiles.hpp"
#include "solver.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace milne {

struct RunConfig {
    // Problem.
    std::string kind = "classical";
    double eps = 0.04;
    double R = 6.0;
    /// 0 derives the count from `spacing`.
    std::size_t n_eta = 0;
    std::size_t n_theta = 0;
    /// Mesh spacing used when counts are not given; 0 picks a command default.
    double spacing = 0.0;
    std::string h0 = "cosine";

    // Solver.
    double tol = 1e-10;
    std::size_t max_iters = 0;
    std::size_t restart = 100;
    double r_growth = 1.5;
    double lambda_const_tol = 1e-3;
    std::string preconditioner = "sweep";
    /// Grow R (up to four attempts) when the far trace is not yet constant.
    bool auto_retry = true;

    // Regularization.
    int order = 1;
    std::vector<double> alpha{0.157};
    bool full = false;
    bool sweep = false;
    /// Data pair of the first-order mix; both must be flat near grazing.
    std::string phi1 = "tent";
    std::string phi2 = "cosine";

    // Study.
    std::vector<double> eps_list{1.0 / 25, 1.0 / 30, 1.0 / 35, 1.0 / 40, 1.0 / 45};
    bool ray = false;
    std::size_t nmax = 40;
    double spacing_factor = 1.0;

    // Output.
    std::size_t workers = 1;
    std::string out = "milne_out";
    std::string field_format = "csv";

    bool operator==(const RunConfig&) const = default;

    SolverConfig solver() const {
        SolverConfig c;
        c.krylov_tol = tol;
        c.max_iters = max_iters;
        c.restart = restart;
        c.r_growth = r_growth;
        c.lambda_const_tol = lambda_const_tol;
        if (preconditioner == "sweep") {
            c.preconditioner = Preconditioner::Sweep;
        } else if (preconditioner == "jacobi") {
            c.preconditioner = Preconditioner::Jacobi;
        } else {
            c.preconditioner = Preconditioner::None;
        }
        return c;
    }

    EquationKind equation() const {
        return kind == "milne" ? EquationKind::milne(eps) : EquationKind::classical();
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    return {
        {"kind", c.kind},
        {"eps", c.eps},
        {"R", c.R},
        {"n_eta", c.n_eta},
        {"n_theta", c.n_theta},
        {"spacing", c.spacing},
        {"h0", c.h0},
        {"tol", c.tol},
        {"max_iters", c.max_iters},
        {"restart", c.restart},
        {"r_growth", c.r_growth},
        {"lambda_const_tol", c.lambda_const_tol},
        {"preconditioner", c.preconditioner},
        {"auto_retry", c.auto_retry},
        {"order", c.order},
        {"alpha", c.alpha},
        {"full", c.full},
        {"sweep", c.sweep},
        {"phi1", c.phi1},
        {"phi2", c.phi2},
        {"eps_list", c.eps_list},
        {"ray", c.ray},
        {"nmax", c.nmax},
        {"spacing_factor", c.spacing_factor},
        {"workers", c.workers},
        {"out", c.out},
        {"field_format", c.field_format},
    };
}

/// Canonical text form: keys sorted, two-space indent.
inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

namespace detail {

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& dst) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, int>) {
            if (!it->is_number_integer()) throw InvalidArgument("expected an integer");
            if constexpr (std::is_same_v<T, std::size_t>) {
                if (it->get<long long>() < 0) throw InvalidArgument("expected a non-negative integer");
            }
        } else if constexpr (std::is_same_v<T, double>) {
            if (!it->is_number()) throw InvalidArgument("expected a number");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) throw InvalidArgument("expected true or false");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) throw InvalidArgument("expected a string");
        } else {
            if (!it->is_array()) throw InvalidArgument("expected an array of numbers");
            for (const auto& v : *it) {
                if (!v.is_number()) throw InvalidArgument("expected an array of numbers");
            }
        }
        dst = it->get<T>();
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace detail

/// Parses a JSON config. Unknown keys and type mismatches are rejected with the
/// offending field; syntax errors report line and column.
inline RunConfig parse_run_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw InvalidArgument("config: top level must be a JSON object");
    RunConfig c;
    const nlohmann::json known = to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw InvalidArgument("config: unknown field '" + key + "'");
    }
    detail::read_field(j, "kind", c.kind);
    detail::read_field(j, "eps", c.eps);
    detail::read_field(j, "R", c.R);
    detail::read_field(j, "n_eta", c.n_eta);
    detail::read_field(j, "n_theta", c.n_theta);
    detail::read_field(j, "spacing", c.spacing);
    detail::read_field(j, "h0", c.h0);
    detail::read_field(j, "tol", c.tol);
    detail::read_field(j, "max_iters", c.max_iters);
    detail::read_field(j, "restart", c.restart);
    detail::read_field(j, "r_growth", c.r_growth);
    detail::read_field(j, "lambda_const_tol", c.lambda_const_tol);
    detail::read_field(j, "preconditioner", c.preconditioner);
    detail::read_field(j, "auto_retry", c.auto_retry);
    detail::read_field(j, "order", c.order);
    detail::read_field(j, "alpha", c.alpha);
    detail::read_field(j, "full", c.full);
    detail::read_field(j, "sweep", c.sweep);
    detail::read_field(j, "phi1", c.phi1);
    detail::read_field(j, "phi2", c.phi2);
    detail::read_field(j, "eps_list", c.eps_list);
    detail::read_field(j, "ray", c.ray);
    detail::read_field(j, "nmax", c.nmax);
    detail::read_field(j, "spacing_factor", c.spacing_factor);
    detail::read_field(j, "workers", c.workers);
    detail::read_field(j, "out", c.out);
    detail::read_field(j, "field_format", c.field_format);
    return c;
}

/// Checks every numeric parameter against the module preconditions.
inline void validate(const RunConfig& c, const std::string& command) {
    auto fail = [](const std::string& msg) { throw InvalidArgument(msg); };
    if (c.kind != "classical" && c.kind != "milne") fail("kind must be 'classical' or 'milne'");
    if (c.kind == "milne" && !(c.eps > 0.0 && c.eps < 1.0)) fail("eps must lie in (0, 1)");
    if (!(c.R > 0.0) || !std::isfinite(c.R)) fail("R must be positive");
    if (c.n_eta != 0 && c.n_eta < 2) fail("n_eta must be at least 2");
    if (c.n_theta != 0 && (c.n_theta < 4 || c.n_theta % 2 != 0)) fail("n_theta must be even and at least 4");
    if ((c.n_eta == 0) != (c.n_theta == 0)) fail("give both n_eta and n_theta, or neither");
    if (!(c.spacing >= 0.0)) fail("spacing must be non-negative");
    if (!(c.tol > 0.0 && c.tol < 1.0)) fail("tol must lie in (0, 1)");
    if (c.restart == 0) fail("restart must be positive");
    if (!(c.r_growth > 1.0)) fail("r_growth must exceed 1");
    if (!(c.lambda_const_tol > 0.0)) fail("lambda_const_tol must be positive");
    if (c.preconditioner != "sweep" && c.preconditioner != "jacobi" && c.preconditioner != "none") {
        fail("preconditioner must be 'sweep', 'jacobi' or 'none'");
    }
    if (c.workers == 0) fail("workers must be at least 1");
    if (c.field_format != "csv" && c.field_format != "bin") fail("field_format must be 'csv' or 'bin'");
    if (c.out.empty()) fail("out must not be empty");
    profiles::parse(c.h0);
    if (command == "regularize") {
        if (c.order < 1) fail("order must be at least 1 (order 1 is the first-order mix)");
        if (c.order > 1 && !c.full) fail("orders above 1 require --full");
        if (c.alpha.empty()) fail("alpha must not be empty");
        if (c.alpha.size() > 1 && !c.sweep) fail("several alpha values require --sweep");
        for (double a : c.alpha) {
            if (!(a > 0.0 && a < std::numbers::pi / 4.0)) fail("alpha must lie in (0, pi/4)");
        }
        if (!c.full) {
            profiles::parse(c.phi1);
            profiles::parse(c.phi2);
        }
    }
    if (command == "study") {
        if (c.eps_list.empty()) fail("eps_list must not be empty");
        for (double e : c.eps_list) {
            if (!(e > 0.0 && e < 1.0)) fail("every eps in eps_list must lie in (0, 1)");
        }
        if (!(c.spacing_factor > 0.0 && c.spacing_factor <= 1.0)) fail("spacing_factor must lie in (0, 1]");
    }
}

}  // namespace milne

#pragma once

// Built-in incoming-data profiles h0(theta) on (0, pi).

#include "errors.hpp"
#include "field_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace milne {

using Profile = std::function<double(double)>;

namespace profiles {

inline Profile constant(double c) {
    return [c](double) { return c; };
}

/// 0 on the bands of width pi/20 at each end, 1 - (9pi/20)|theta - pi/2| in between.
/// The slope is taken as written; the profile dips to about -1 at the band edges.
inline Profile tent() {
    return [](double t) {
        constexpr double pi = std::numbers::pi;
        if (t <= pi / 20.0 || t >= pi - pi / 20.0) return 0.0;
        return 1.0 - (9.0 * pi / 20.0) * std::abs(t - pi / 2.0);
    };
}

/// 1 on the quarter bands at each end, cos(theta) in between.
inline Profile cosine() {
    return [](double t) {
        constexpr double pi = std::numbers::pi;
        if (t <= pi / 4.0 || t >= pi - pi / 4.0) return 1.0;
        return std::cos(t);
    };
}

/// 1 for theta < pi/2, 0 after.
inline Profile step() {
    return [](double t) { return t < std::numbers::pi / 2.0 ? 1.0 : 0.0; };
}

/// Piecewise-linear interpolant of "theta,value" samples (one pair per line, '#'
/// comments allowed), held constant outside the sampled range.
inline Profile from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open profile file " + path);
    std::vector<std::pair<double, double>> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto sep = line.find_first_of(", \t");
        if (sep == std::string::npos) {
            throw IoError(path + ":" + std::to_string(lineno) + ": expected 'theta,value'");
        }
        const std::string where = path + ":" + std::to_string(lineno);
        auto rest = line.find_first_not_of(", \t", sep);
        if (rest == std::string::npos) throw IoError(where + ": missing value");
        pts.emplace_back(detail::parse_double(std::string_view(line).substr(0, sep), where),
                         detail::parse_double(std::string_view(line).substr(rest), where));
    }
    if (pts.empty()) throw IoError("profile file " + path + " has no samples");
    std::sort(pts.begin(), pts.end());
    auto shared = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(pts));
    return [shared](double t) {
        const auto& p = *shared;
        if (t <= p.front().first) return p.front().second;
        if (t >= p.back().first) return p.back().second;
        auto hi = std::upper_bound(p.begin(), p.end(), std::make_pair(t, -HUGE_VAL));
        auto lo = hi - 1;
        const double w = (t - lo->first) / (hi->first - lo->first);
        return lo->second + w * (hi->second - lo->second);
    };
}

/// Parses "constant:<c>", "tent", "cosine", "step" or "file:<path>".
inline Profile parse(const std::string& spec) {
    if (spec == "tent") return tent();
    if (spec == "cosine") return cosine();
    if (spec == "step") return step();
    if (spec.rfind("constant:", 0) == 0) {
        double c = 0.0;
        try {
            c = detail::parse_double(std::string_view(spec).substr(9), "--h0");
        } catch (const IoError& e) {
            throw InvalidArgument(e.what());
        }
        if (!std::isfinite(c)) throw InvalidArgument("--h0 constant must be finite");
        return constant(c);
    }
    if (spec.rfind("file:", 0) == 0 && spec.size() > 5) return from_file(spec.substr(5));
    throw InvalidArgument("unknown profile '" + spec +
                          "' (expected constant:<c>, tent, cosine, step or file:<path>)");
}

}  // namespace profiles
}  // namespace milne

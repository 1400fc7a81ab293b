#pragma once

// Field serialization shared by every artifact.
//
// CSV:    "# milne-field R=<R> n_eta=<n> n_theta=<m>" then n+1 rows of m values.
// Binary: "MLNF" | u32 version=1 | f64 R | u64 n_eta | u64 n_theta | f64 values[],
//         little-endian, row-major (eta rows, theta columns).

#include "errors.hpp"
#include "grid.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace milne {

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw IoError(context + ": cannot parse number '" + std::string(text) + "'");
    }
    return v;
}

/// Grid described by a file header; bad or absurd sizes are reported as IoError.
inline Grid grid_from_header(double depth, unsigned long long n_eta, unsigned long long n_theta,
                             const char* what) {
    if (n_eta > (1ull << 24) || n_theta > (1ull << 24) || (n_eta + 1) * n_theta > (1ull << 31)) {
        throw IoError(std::string(what) + ": grid in header is too large");
    }
    try {
        return make_grid(depth, static_cast<std::size_t>(n_eta), static_cast<std::size_t>(n_theta));
    } catch (const InvalidArgument& e) {
        throw IoError(std::string(what) + ": invalid grid in header (" + e.what() + ")");
    }
}

static_assert(std::endian::native == std::endian::little, "binary field format assumes little-endian");

}  // namespace detail

inline void write_field_csv(const Field& field, std::ostream& out) {
    const Grid& g = field.grid();
    out << "# milne-field R=" << detail::format_double(g.depth()) << " n_eta=" << g.n_eta()
        << " n_theta=" << g.n_theta() << "\n";
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        auto row = field.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << detail::format_double(row[j]);
        }
        out << '\n';
    }
}

inline Field read_field_csv(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("# milne-field", 0) != 0) {
        throw IoError("field csv: missing '# milne-field' header");
    }
    double depth = 0.0;
    unsigned long long n_eta = 0, n_theta = 0;
    if (std::sscanf(header.c_str(), "# milne-field R=%lf n_eta=%llu n_theta=%llu", &depth, &n_eta,
                    &n_theta) != 3) {
        throw IoError("field csv: malformed header '" + header + "'");
    }
    Grid g = detail::grid_from_header(depth, n_eta, n_theta, "field csv");
    Field f(g);
    std::string line;
    for (std::size_t i = 0; i < g.eta_count(); ++i) {
        if (!std::getline(in, line)) {
            throw IoError("field csv: expected " + std::to_string(g.eta_count()) + " rows, got " +
                          std::to_string(i));
        }
        std::size_t j = 0;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) comma = line.size();
            if (j >= g.n_theta()) {
                throw IoError("field csv: row " + std::to_string(i) + " has too many columns");
            }
            f.at(i, j++) = detail::parse_double(std::string_view(line).substr(start, comma - start),
                                                "field csv row " + std::to_string(i));
            start = comma + 1;
        }
        if (j != g.n_theta()) {
            throw IoError("field csv: row " + std::to_string(i) + " has " + std::to_string(j) +
                          " columns, expected " + std::to_string(g.n_theta()));
        }
    }
    return f;
}

inline void write_field_binary(const Field& field, std::ostream& out) {
    const Grid& g = field.grid();
    const std::uint32_t version = 1;
    const double depth = g.depth();
    const std::uint64_t n_eta = g.n_eta();
    const std::uint64_t n_theta = g.n_theta();
    out.write("MLNF", 4);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&depth), sizeof depth);
    out.write(reinterpret_cast<const char*>(&n_eta), sizeof n_eta);
    out.write(reinterpret_cast<const char*>(&n_theta), sizeof n_theta);
    auto v = field.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

inline Field read_field_binary(std::istream& in) {
    char magic[4];
    std::uint32_t version = 0;
    double depth = 0.0;
    std::uint64_t n_eta = 0, n_theta = 0;
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MLNF", 4) != 0) {
        throw IoError("field binary: bad magic");
    }
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&depth), sizeof depth);
    in.read(reinterpret_cast<char*>(&n_eta), sizeof n_eta);
    in.read(reinterpret_cast<char*>(&n_theta), sizeof n_theta);
    if (!in || version != 1) {
        throw IoError("field binary: truncated header or unsupported version");
    }
    Field f(detail::grid_from_header(depth, n_eta, n_theta, "field binary"));
    auto v = f.values();
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
    if (!in) {
        throw IoError("field binary: truncated payload");
    }
    return f;
}

/// Writes CSV unless the path ends in ".bin".
inline void save_field(const Field& field, const std::filesystem::path& path) {
    const bool binary = path.extension() == ".bin";
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    if (binary) {
        write_field_binary(field, out);
    } else {
        write_field_csv(field, out);
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

inline Field load_field(const std::filesystem::path& path) {
    const bool binary = path.extension() == ".bin";
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return binary ? read_field_binary(in) : read_field_csv(in);
}

}  // namespace milne

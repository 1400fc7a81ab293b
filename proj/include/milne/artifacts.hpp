#pragma once

// Text artifacts: matched-solution headers, regularization records, study bundles,
// and a writer that commits a set of files all at once or not at all.

#include "errors.hpp"
#include "field_io.hpp"
#include "regularize.hpp"
#include "solver.hpp"
#include "study.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace milne {

/// Collects file contents in memory and writes them on commit. Every file is first
/// written beside its target and renamed only after all writes succeeded.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }

    void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

    void add_field(const std::string& name, const Field& f) {
        std::ostringstream out(std::ios::binary);
        if (std::filesystem::path(name).extension() == ".bin") {
            write_field_binary(f, out);
        } else {
            write_field_csv(f, out);
        }
        add(name, out.str());
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& f : files_) out.push_back(f.first);
        return out;
    }

    void commit() {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
        std::vector<fs::path> staged;
        auto discard = [&]() {
            for (const auto& p : staged) fs::remove(p, ec);
        };
        for (const auto& [name, content] : files_) {
            fs::path tmp = dir_ / (name + ".partial");
            std::ofstream out(tmp, std::ios::binary);
            if (out) out.write(content.data(), static_cast<std::streamsize>(content.size()));
            if (out) staged.push_back(tmp);
            if (!out) {
                out.close();
                fs::remove(tmp, ec);
                discard();
                throw IoError("cannot write " + (dir_ / name).string());
            }
        }
        for (std::size_t k = 0; k < files_.size(); ++k) {
            fs::rename(staged[k], dir_ / files_[k].first, ec);
            if (ec) {
                const std::string what = "cannot move " + staged[k].string() + " into place: " + ec.message();
                for (std::size_t m = 0; m < k; ++m) fs::remove(dir_ / files_[m].first, ec);
                staged.erase(staged.begin(), staged.begin() + static_cast<std::ptrdiff_t>(k));
                discard();
                throw IoError(what);
            }
        }
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> files_;
};

namespace detail {

inline std::string kv(const std::string& key, double v) { return key + " = " + format_double(v) + "\n"; }
inline std::string kv(const std::string& key, std::size_t v) { return key + " = " + std::to_string(v) + "\n"; }
inline std::string kv(const std::string& key, const std::string& v) { return key + " = " + v + "\n"; }

inline nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

/// Key-value header ("key = value" per line) describing a matched solution.
inline std::string matched_header(const MatchedSolution& sol, const EquationKind& kind) {
    const Grid& g = sol.f.grid();
    std::string s = "# milne-matched-solution\n";
    s += detail::kv("kind", std::string(kind.is_milne() ? "milne" : "classical"));
    if (kind.is_milne()) s += detail::kv("eps", kind.eps);
    s += detail::kv("R", g.depth());
    s += detail::kv("n_eta", g.n_eta());
    s += detail::kv("n_theta", g.n_theta());
    s += detail::kv("lam", sol.lam);
    s += detail::kv("constancy_residual", sol.constancy_residual);
    s += detail::kv("f1_iterations", sol.f1_stats.iterations);
    s += detail::kv("f2_iterations", sol.f2_stats.iterations);
    s += detail::kv("f1_relative_residual", sol.f1_stats.relative_residual);
    s += detail::kv("f2_relative_residual", sol.f2_stats.relative_residual);
    return s;
}

/// Parses a key-value block; '#' starts a comment.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw IoError("key-value line " + std::to_string(lineno) + ": missing '='");
        }
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

inline nlohmann::json regularization_json(const RegularizationSet& set,
                                          const std::vector<std::string>& base_files = {}) {
    nlohmann::json j;
    j["order_n"] = set.order_n;
    j["alpha"] = set.alpha;
    j["c"] = set.c;
    j["lambda_n"] = set.lambda_n;
    j["mu"] = set.mu;
    const Grid& g = set.grid();
    j["grid"] = {{"R", g.depth()}, {"n_eta", g.n_eta()}, {"n_theta", g.n_theta()}};
    j["base_solves"] = set.base_solves;
    j["auxiliary_solves"] = set.auxiliary_solves;
    nlohmann::json brackets = nlohmann::json::array();
    for (const auto& row : set.brackets) {
        nlohmann::json r = nlohmann::json::array();
        for (double v : row) r.push_back(detail::number_or_null(v));
        brackets.push_back(r);
    }
    j["brackets"] = brackets;
    j["closure_residuals"] = closure_residuals(set);
    nlohmann::json base = {{"r1_lam", set.r1.lam}, {"r2_lam", set.r2.lam}};
    if (!base_files.empty()) base["files"] = base_files;
    j["base"] = base;
    return j;
}

inline std::string first_order_json(const FirstOrderMix& mix, double edge_width) {
    nlohmann::json j;
    j["lambda0"] = mix.lambda0;
    j["edge_width"] = edge_width;
    j["defect1"] = mix.defect1;
    j["defect2"] = mix.defect2;
    j["matching_form"] = mix.matching_form;
    j["alternate_form"] = mix.alternate_form;
    j["matches"] = to_string(mix.matches);
    j["edge_flatness"] = mix.edge_flatness;
    const Grid& g = mix.tilde_f.grid();
    j["grid"] = {{"R", g.depth()}, {"n_eta", g.n_eta()}, {"n_theta", g.n_theta()}};
    return j.dump(2) + "\n";
}

namespace detail {

inline std::string metric_csv(const StudyReport& r, double (*pick)(const StudyRecord&)) {
    std::string s = "eps,value\n";
    for (const auto& rec : r.records) s += format_double(rec.eps) + "," + format_double(pick(rec)) + "\n";
    return s;
}

}  // namespace detail

inline nlohmann::json study_summary_json(const StudyReport& r) {
    using nlohmann::json;
    json j;
    j["eps_list"] = r.eps_list;
    json recs = json::array();
    for (const auto& rec : r.records) {
        recs.push_back({
            {"eps", rec.eps},
            {"grid", {{"R", rec.depth}, {"n_eta", rec.n_eta}, {"n_theta", rec.n_theta}, {"d_eta", rec.d_eta},
                      {"d_theta", rec.d_theta}}},
            {"l2_err", rec.errors.l2},
            {"linf_domain_err", rec.errors.linf_domain},
            {"linf_at_R_err", rec.errors.linf_at_R},
            {"lam_classical", rec.lam_classical},
            {"lam_milne", rec.lam_milne},
            {"lambda_gap", rec.lambda_gap},
            {"constancy_classical", rec.constancy_classical},
            {"constancy_milne", rec.constancy_milne},
            {"conservation_defect_milne", rec.conservation_milne.defect},
            {"conservation_defect_classical", rec.conservation_classical.defect},
            {"max_sin_moment_classical", rec.conservation_classical.max_abs_sin_moment},
            {"iterations_classical", rec.iterations_classical},
            {"iterations_milne", rec.iterations_milne},
            {"ray_n0", rec.ray.empty() ? json(nullptr) : json(rec.ray.front())},
        });
    }
    j["records"] = recs;
    j["slopes"] = {
        {"l2_err", detail::number_or_null(r.slopes.l2)},
        {"linf_at_R_err", detail::number_or_null(r.slopes.linf_at_R)},
        {"linf_domain_err", detail::number_or_null(r.slopes.linf_domain)},
        {"lambda_gap", detail::number_or_null(r.slopes.lambda_gap)},
        {"lambda_gap_reference", 2.0 / 3.0},
        {"conservation_defect", detail::number_or_null(r.slopes.conservation_defect)},
    };
    json fails = json::array();
    for (const auto& f : r.failures) fails.push_back({{"eps", f.eps}, {"error", f.error}, {"message", f.message}});
    j["failures"] = fails;
    return j;
}

inline constexpr const char* kErrorPlotScript = R"py(import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(name):
    with open(name) as f:
        rows = list(csv.DictReader(f))
    return [float(r["eps"]) for r in rows], [float(r["value"]) for r in rows]


fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
for ax, (name, title) in zip(axes, [("l2_err.csv", "L2 over the strip"),
                                    ("linf_at_R_err.csv", "Linf at eta = R"),
                                    ("linf_domain_err.csv", "Linf over the strip")]):
    eps, val = load(name)
    ax.loglog(eps, val, "o-")
    ax.set_xlabel("eps")
    ax.set_title(title)
fig.tight_layout()
fig.savefig("errors.png", dpi=150)
)py";

inline constexpr const char* kRayPlotScript = R"py(import csv
from collections import defaultdict
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

series = defaultdict(list)
with open("ray.csv") as f:
    for r in csv.DictReader(f):
        series[float(r["eps"])].append((int(r["n"]), float(r["value"])))

fig, ax = plt.subplots(figsize=(5, 3.5))
for eps, pts in sorted(series.items(), reverse=True):
    ax.plot([p[0] for p in pts], [p[1] for p in pts], ".-", label="eps = 1/%.0f" % (1 / eps))
ax.set_xlabel("n")
ax.set_ylabel("difference at (n eps, n eps)")
ax.legend()
fig.tight_layout()
fig.savefig("ray.png", dpi=150)
)py";

/// Adds the CSVs, summary, failure manifest and plot scripts of a study to `w`.
inline void add_study_artifacts(ArtifactWriter& w, const StudyReport& r, bool ray, bool plots = true) {
    w.add("l2_err.csv", detail::metric_csv(r, [](const StudyRecord& x) { return x.errors.l2; }));
    w.add("linf_domain_err.csv", detail::metric_csv(r, [](const StudyRecord& x) { return x.errors.linf_domain; }));
    w.add("linf_at_R_err.csv", detail::metric_csv(r, [](const StudyRecord& x) { return x.errors.linf_at_R; }));
    w.add("lambda_gap.csv", detail::metric_csv(r, [](const StudyRecord& x) { return x.lambda_gap; }));
    w.add("conservation_defect.csv",
          detail::metric_csv(r, [](const StudyRecord& x) { return x.conservation_milne.defect; }));
    if (ray) {
        std::string s = "eps,n,eta,value\n";
        for (const auto& rec : r.records) {
            for (std::size_t n = 0; n < rec.ray.size(); ++n) {
                s += detail::format_double(rec.eps) + "," + std::to_string(n) + "," +
                     detail::format_double(static_cast<double>(n) * rec.eps) + "," +
                     detail::format_double(rec.ray[n]) + "\n";
            }
        }
        w.add("ray.csv", s);
    }
    w.add("summary.json", study_summary_json(r).dump(2) + "\n");
    if (!r.failures.empty()) {
        nlohmann::json fails = nlohmann::json::array();
        for (const auto& f : r.failures) fails.push_back({{"eps", f.eps}, {"error", f.error}, {"message", f.message}});
        w.add("failures.json", fails.dump(2) + "\n");
    }
    if (plots) {
        w.add("plot_errors.py", kErrorPlotScript);
        if (ray) w.add("plot_ray.py", kRayPlotScript);
    }
}

}  // namespace milne

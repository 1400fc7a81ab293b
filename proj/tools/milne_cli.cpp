// milne: solve, regularize and study half-space transport problems.
//
//   milne solve --kind milne --eps 0.04 --R 6
//   milne regularize --order 3 --full --sweep --alpha 0.2/0.1/0.05
//   milne study --ray --nmax 40
//
// A JSON config (--config) supplies defaults; flags given on the command line win.
// MILNE_OUT_DIR replaces the output directory unless --out is given.

#include <milne/milne.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Overrides {
    std::string config_path;
    bool dump_config = false;
    std::optional<std::string> kind, h0, preconditioner, phi1, phi2, out, format;
    std::optional<double> eps, depth, spacing, tol, r_growth, lambda_const_tol, spacing_factor;
    std::optional<std::size_t> n_eta, n_theta, max_iters, restart, nmax, workers;
    std::optional<int> order;
    std::vector<std::string> alpha, eps_list;
    bool auto_retry = false, no_auto_retry = false, full = false, sweep = false, ray = false;
};

// Values separated by spaces or commas. With slash_is_separator "0.2/0.1" is two
// values; otherwise "1/25" is read as a fraction.
std::vector<double> parse_list(const std::vector<std::string>& items, const char* flag, bool slash_is_separator) {
    std::vector<double> out;
    for (const auto& item : items) {
        std::string s = item;
        for (char& ch : s) {
            if (ch == ',' || (slash_is_separator && ch == '/')) ch = ' ';
        }
        std::istringstream in(s);
        std::string tok;
        while (in >> tok) {
            double v = 0.0;
            const auto slash = tok.find('/');
            try {
                if (slash == std::string::npos) {
                    v = milne::detail::parse_double(tok, flag);
                } else {
                    v = milne::detail::parse_double(tok.substr(0, slash), flag) /
                        milne::detail::parse_double(tok.substr(slash + 1), flag);
                }
            } catch (const milne::IoError& e) {
                throw milne::InvalidArgument(e.what());
            }
            out.push_back(v);
        }
    }
    return out;
}

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config_path, "JSON config file; flags override it");
    sub->add_flag("--dump-config", o.dump_config, "Print the effective config and exit");
    sub->add_option("--kind", o.kind, "classical | milne");
    sub->add_option("--eps", o.eps, "Milne parameter, 0 < eps < 1");
    sub->add_option("--R", o.depth, "Strip depth");
    sub->add_option("--n-eta", o.n_eta, "Cells in eta (with --n-theta)");
    sub->add_option("--n-theta", o.n_theta, "Cells in theta, even");
    sub->add_option("--spacing", o.spacing, "Mesh spacing when cell counts are not given");
    sub->add_option("--h0", o.h0, "constant:<c> | tent | cosine | step | file:<path>");
    sub->add_option("--tol", o.tol, "Relative residual tolerance");
    sub->add_option("--max-iters", o.max_iters, "Krylov iteration cap (0 = automatic)");
    sub->add_option("--restart", o.restart, "Krylov restart length");
    sub->add_option("--r-growth", o.r_growth, "Depth growth factor for retries");
    sub->add_option("--lambda-const-tol", o.lambda_const_tol, "Allowed variation of the far trace");
    sub->add_option("--preconditioner", o.preconditioner, "sweep | jacobi | none");
    sub->add_flag("--auto-retry", o.auto_retry, "Grow R until the far trace is constant (default)");
    sub->add_flag("--no-auto-retry", o.no_auto_retry, "Fail with DomainTooSmall instead of growing R");
    sub->add_option("--workers", o.workers, "Worker threads");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--format", o.format, "Field format: csv | bin");
}

milne::RunConfig effective_config(const Overrides& o) {
    milne::RunConfig c;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw milne::InvalidArgument("cannot open config file " + o.config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        c = milne::parse_run_config(buf.str());
    }
    if (!o.out) {
        if (const char* env = std::getenv("MILNE_OUT_DIR"); env && *env) c.out = env;
    }
    auto set = [](auto& dst, const auto& src) {
        if (src) dst = *src;
    };
    set(c.kind, o.kind);
    set(c.eps, o.eps);
    set(c.R, o.depth);
    set(c.n_eta, o.n_eta);
    set(c.n_theta, o.n_theta);
    set(c.spacing, o.spacing);
    set(c.h0, o.h0);
    set(c.tol, o.tol);
    set(c.max_iters, o.max_iters);
    set(c.restart, o.restart);
    set(c.r_growth, o.r_growth);
    set(c.lambda_const_tol, o.lambda_const_tol);
    set(c.preconditioner, o.preconditioner);
    set(c.order, o.order);
    set(c.phi1, o.phi1);
    set(c.phi2, o.phi2);
    set(c.nmax, o.nmax);
    set(c.spacing_factor, o.spacing_factor);
    set(c.workers, o.workers);
    set(c.out, o.out);
    set(c.field_format, o.format);
    if (o.auto_retry && o.no_auto_retry) {
        throw milne::InvalidArgument("--auto-retry and --no-auto-retry are exclusive");
    }
    if (o.auto_retry) c.auto_retry = true;
    if (o.no_auto_retry) c.auto_retry = false;
    if (o.full) c.full = true;
    if (o.sweep) c.sweep = true;
    if (o.ray) c.ray = true;
    if (!o.alpha.empty()) c.alpha = parse_list(o.alpha, "--alpha", true);
    if (!o.eps_list.empty()) c.eps_list = parse_list(o.eps_list, "--eps-list", false);
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Half-space transport: matched solutions, regularized data, eps-studies"};
    app.require_subcommand(1);
    Overrides o;

    auto* solve = app.add_subcommand("solve", "Solve one half-space problem by double shooting");
    add_common(solve, o);

    auto* reg = app.add_subcommand("regularize", "Modify incoming data so the solution is regular");
    add_common(reg, o);
    reg->add_option("--order", o.order, "1 = first-order mix; N >= 1 with --full");
    reg->add_option("--alpha", o.alpha, "Edge width(s); lists as 0.2/0.1/0.05 or 0.2,0.1");
    reg->add_flag("--full", o.full, "Run the order-N recursion on --h0");
    reg->add_flag("--sweep", o.sweep, "Fit c_k against alpha over several --alpha values");
    reg->add_option("--phi1", o.phi1, "First-order mix: data flat at 0 near grazing");
    reg->add_option("--phi2", o.phi2, "First-order mix: data flat at 1 near grazing");

    auto* study = app.add_subcommand("study", "Compare eps-Milne and classical solutions over eps");
    add_common(study, o);
    study->add_option("--eps-list", o.eps_list, "eps values, e.g. 1/25,1/30,1/35");
    study->add_flag("--ray", o.ray, "Record the difference along the ray eta = theta = n eps");
    study->add_option("--nmax", o.nmax, "Last ray index");
    study->add_option("--spacing-factor", o.spacing_factor, "Mesh spacing as a fraction of eps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return milne::exit_code::usage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const milne::RunConfig cfg = effective_config(o);
        if (o.dump_config) {
            milne::validate(cfg, command);
            std::cout << milne::serialize(cfg);
            return 0;
        }
        milne::CommandResult r;
        if (command == "solve") {
            r = milne::cmd_solve(cfg);
        } else if (command == "regularize") {
            r = milne::cmd_regularize(cfg);
        } else {
            r = milne::cmd_study(cfg);
        }
        for (const auto& line : r.lines) std::cout << line << "\n";
        std::cout << "wrote " << r.files.size() << " files to " << cfg.out << "\n";
        return r.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "milne " << command << ": " << e.what() << "\n";
        return milne::exit_code_for(e);
    }
}

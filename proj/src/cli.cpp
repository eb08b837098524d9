#include "mfg/cli.hpp"

#include "mfg/config.hpp"
#include "mfg/io.hpp"
#include "mfg/nashlab.hpp"
#include "mfg/wellposed.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

namespace mfg {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::string out_dir = ".";
    int threads = 0;
};

struct SolveFlags {
    std::optional<double> tol;
    std::optional<int> max_iter, paths, particles, steps;
    std::optional<std::uint64_t> seed;
};

struct StudyFlags {
    std::optional<std::string> kind;
    std::optional<std::vector<int>> Ns;
    std::optional<int> reps, agent;
    std::optional<std::uint64_t> seed;
};

/// Output files of one command, named <hash>-r<seq>-<suffix>.
class Run {
public:
    Run(const Common& c, const RunConfig& cfg, const std::string& command)
        : dir_(c.out_dir), start_(std::chrono::steady_clock::now())
    {
        fs::create_directories(dir_);
        m_.command = command;
        m_.hash = hex64(fnv1a(dump_config(cfg) + "\n" + command));
        m_.sequence = next_sequence(dir_, m_.hash);
        m_.seed = cfg.solver.seed;
        m_.J = cfg.solver.J;
        m_.P = cfg.solver.P;
        m_.M = cfg.solver.M;
        m_.tol = cfg.solver.options.tol;
        m_.max_iter = cfg.solver.options.max_iter;
    }

    fs::path file(const std::string& suffix)
    {
        const std::string name = m_.hash + "-r" + std::to_string(m_.sequence) + "-" + suffix;
        m_.files.push_back(name);
        return dir_ / name;
    }

    void json_file(const std::string& suffix, const json& j)
    {
        std::ofstream out(file(suffix), std::ios::binary);
        out << j.dump(2) << '\n';
    }

    int finish(int code)
    {
        m_.exit_code = code;
        m_.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        append_manifest(dir_, m_);
        return code;
    }

private:
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    RunManifest m_;
};

std::string fmt(double x)
{
    std::ostringstream s;
    s << std::setprecision(6) << x;
    return s.str();
}

void set_threads(int threads)
{
    if (threads <= 0) {
        if (const char* env = std::getenv("MFG_THREADS")) {
            try {
                threads = std::stoi(env);
            } catch (const std::exception&) {
                throw ConfigError(std::string("MFG_THREADS is not an integer: '") + env + "'");
            }
            if (threads <= 0) throw ConfigError("MFG_THREADS must be positive");
        }
    }
    if (threads > 0) omp_set_num_threads(threads);
}

void apply(RunConfig& cfg, const SolveFlags& f)
{
    auto& s = cfg.solver;
    if (f.tol) s.options.tol = *f.tol;
    if (f.max_iter) s.options.max_iter = *f.max_iter;
    if (f.paths) s.P = *f.paths;
    if (f.particles) s.M = *f.particles;
    if (f.steps) s.J = *f.steps;
    if (f.seed) s.seed = *f.seed;
    if (!(s.options.tol > 0)) throw ConfigError("--tol must be positive");
    if (s.options.max_iter < 1 || s.P < 1 || s.M < 1 || s.J < 1)
        throw ConfigError("--max-iter, --paths, --particles and --steps must be positive");
}

void apply(RunConfig& cfg, const StudyFlags& f)
{
    auto& s = cfg.study;
    if (f.kind) s.kind = *f.kind;
    if (f.Ns) s.Ns = *f.Ns;
    if (f.reps) s.replications = *f.reps;
    if (f.agent) s.agent = *f.agent;
    if (f.seed) s.seed = *f.seed;
    if (s.kind != "state-gap" && s.kind != "cost-gap" && s.kind != "nash-major" && s.kind != "nash-minor")
        throw ConfigError("unknown study '" + s.kind + "' (state-gap, cost-gap, nash-major, nash-minor)");
    if (s.Ns.empty()) throw ConfigError("--Ns needs at least one population size");
    for (int N : s.Ns)
        if (N < 1) throw ConfigError("population sizes must be positive");
    if (s.replications < 2) throw ConfigError("--reps must be at least 2");
    if (s.kind == "nash-minor") {
        const int smallest = *std::min_element(s.Ns.begin(), s.Ns.end());
        if (s.agent < 1 || s.agent > smallest)
            throw ConfigError("--agent " + std::to_string(s.agent) + " is outside 1.." + std::to_string(smallest));
    }
}

RunConfig load_valid(const std::string& path)
{
    RunConfig cfg = load_config(path);
    const ValidationReport v = validate_spec(cfg.spec);
    if (!v.ok()) {
        std::string msg = path + ": invalid model";
        for (const auto& s : v.violations) msg += "\n  " + s;
        throw ConfigError(msg);
    }
    return cfg;
}

json fit_json(const RateFit& f)
{
    return {{"slope", f.slope},   {"intercept", f.intercept}, {"r2", f.r2},          {"slope_se", f.slope_se},
            {"ci_low", f.ci_low}, {"ci_high", f.ci_high},     {"points", f.points}};
}

json report_json(const PicardReport& r)
{
    return {{"iterations", r.iterations},
            {"converged", r.converged},
            {"diverged", r.diverged},
            {"driver", to_string(r.driver)},
            {"deltas", r.deltas},
            {"ratios", r.ratios},
            {"final_residual", r.final_residual},
            {"regression_warnings", r.regression_warnings},
            {"message", r.message}};
}

void print_report(std::ostream& out, const PicardReport& r)
{
    out << "picard: " << (r.converged ? "converged" : r.diverged ? "diverged" : "not converged") << " after "
        << r.iterations << " iterations, residual " << fmt(r.final_residual) << "\n";
    out << "ratios:";
    for (double x : r.ratios) out << " " << fmt(x);
    out << "\n";
    if (!r.message.empty()) out << "note: " << r.message << "\n";
}

CCSolution solve(const RunConfig& cfg)
{
    const auto& s = cfg.solver;
    auto ens = std::make_shared<const NoiseEnsemble>(
        sample_ensemble(TimeGrid(cfg.spec.T, s.J), s.P, s.M, cfg.spec.K(), s.seed, s.options.memory_cap));
    return picard_solve(cfg.spec, ens, s.options);
}

int cmd_check(const Common& c, std::ostream& out)
{
    const RunConfig cfg = load_config(c.config);
    Run run(c, cfg, "check");
    json j;
    const ValidationReport v = validate_spec(cfg.spec);
    out << "validate: " << (v.ok() ? "pass" : "FAIL") << "\n";
    for (const auto& s : v.violations) out << "  violation: " << s << "\n";
    j["valid"] = v.ok();
    j["violations"] = v.violations;
    if (!v.ok()) {
        run.json_file("check.json", j);
        return run.finish(kExitConfig);
    }

    const A4Report a4 = check_A4(cfg.spec);
    out << "A4: " << (a4.pass ? "pass" : "fail") << " M0=" << fmt(a4.M0) << " |D|=" << fmt(a4.Dmax)
        << " M0|D|^2=" << fmt(a4.product) << "\n";
    j["A4"] = {{"pass", a4.pass}, {"M0", a4.M0}, {"Dmax", a4.Dmax}, {"product", a4.product}};

    const GlobalReport g = check_global(cfg.spec);
    const GlobalCertificate& b = g.best();
    out << "spectral: norm " << (g.spectral.norm ? "pass" : "fail") << ", eigen "
        << (g.spectral.eigen ? "pass" : "fail") << " (lhs=" << fmt(g.spectral.lhs) << ")\n";
    out << "global: " << (g.pass() ? "pass" : "fail") << " variant=" << to_string(b.variant)
        << " rho_cert=" << fmt(b.rho_cert);
    if (b.feasible)
        out << " lambda=" << fmt(b.lambda) << " K1=" << fmt(b.K1) << " K2=" << fmt(b.K2) << " K3=" << fmt(b.K3)
            << " K4=" << fmt(b.K4);
    out << "\n";
    auto cert = [](const GlobalCertificate& x) {
        return json{{"variant", to_string(x.variant)},
                    {"feasible", x.feasible},
                    {"pass", x.pass},
                    {"rho_cert", std::isfinite(x.rho_cert) ? json(x.rho_cert) : json(nullptr)},
                    {"lambda", x.lambda},
                    {"K", {x.K1, x.K2, x.K3, x.K4}},
                    {"grid_index", x.grid_index}};
    };
    j["global"] = {{"pass", g.pass()},
                   {"spectral", {{"lhs", g.spectral.lhs}, {"norm", g.spectral.norm}, {"eigen", g.spectral.eigen}}},
                   {"norm", cert(g.norm)},
                   {"eigen", cert(g.eigen)}};

    try {
        const LocalBound lb = local_horizon_bound(cfg.spec, cfg.solver.local_eps);
        const bool ok = lb.T >= cfg.spec.T;
        out << "local: " << (ok ? "pass" : "fail") << " T_max=" << fmt(lb.T) << " (T=" << fmt(cfg.spec.T)
            << ") C_eps=" << fmt(lb.C_eps) << " eps=" << fmt(lb.eps) << "\n";
        j["local"] = {{"pass", ok}, {"T_max", lb.T}, {"C_eps", lb.C_eps}, {"eps", lb.eps}, {"factor", lb.factor}};
    } catch (const PreconditionError& e) {
        out << "local: fail (" << e.what() << ")\n";
        j["local"] = {{"pass", false}, {"reason", e.what()}};
    }
    run.json_file("check.json", j);
    return run.finish(kExitOk);
}

void write_paths(const fs::path& file, const CCSolution& sol)
{
    const CCIterate& it = sol.it;
    const TimeGrid& grid = sol.ensemble->grid;
    CsvTable t;
    t.header = {"j", "t", "path"};
    auto cols = [&](const std::string& base, int d) {
        for (int c = 0; c < d; ++c) t.header.push_back(base + "_" + std::to_string(c));
    };
    cols("alpha0", it.n);
    cols("u0", it.m);
    cols("phi", it.n);
    for (int k = 0; k < it.K; ++k) cols("mean" + std::to_string(k), it.n);
    for (int j = 0; j <= it.J; ++j)
        for (int p = 0; p < it.P; ++p) {
            std::vector<std::string> r{std::to_string(j), format_double(grid.t(j)), std::to_string(p)};
            for (int c = 0; c < it.n; ++c) r.push_back(format_double(it.alpha0[it.major(j, p) + c]));
            for (int c = 0; c < it.m; ++c) r.push_back(format_double(it.u0[it.major_u(j, p) + c]));
            for (int c = 0; c < it.n; ++c) r.push_back(format_double(it.phi[it.major(j, p) + c]));
            for (int k = 0; k < it.K; ++k)
                for (int c = 0; c < it.n; ++c) r.push_back(format_double(it.mean[it.mean_at(j, p, k) + c]));
            t.rows.push_back(std::move(r));
        }
    write_csv(file, t);
}

int cmd_solve(const Common& c, const SolveFlags& f, std::ostream& out)
{
    RunConfig cfg = load_valid(c.config);
    apply(cfg, f);
    Run run(c, cfg, "solve");
    const CCSolution sol = solve(cfg);
    print_report(out, sol.report);
    run.json_file("report.json", report_json(sol.report));
    write_paths(run.file("paths.csv"), sol);
    return run.finish(sol.report.converged ? kExitOk : kExitNoConvergence);
}

void add_row(CsvTable& t, int N, const std::string& metric, double value, double se)
{
    t.rows.push_back({std::to_string(N), metric, format_double(value), format_double(se)});
}

int cmd_study(const Common& c, const SolveFlags& sf, const StudyFlags& f, std::ostream& out)
{
    RunConfig cfg = load_valid(c.config);
    apply(cfg, sf);
    apply(cfg, f);
    if (sf.seed && !f.seed) cfg.study.seed = *sf.seed;
    const StudyConfig& st = cfg.study;
    Run run(c, cfg, "study");
    const CCSolution sol = solve(cfg);
    print_report(out, sol.report);
    run.json_file("report.json", report_json(sol.report));
    if (!sol.report.converged) {
        out << "study skipped: the limiting solution did not converge\n";
        return run.finish(kExitNoConvergence);
    }

    CsvTable t;
    t.header = {"N", "metric", "value", "se"};
    json summary = {{"study", st.kind}, {"Ns", st.Ns}, {"replications", st.replications}, {"seed", st.seed}};
    const bool can_fit = st.Ns.size() >= 4;
    if (!can_fit) summary["fit_refused"] = "fits need at least four population sizes";

    if (st.kind == "state-gap" || st.kind == "cost-gap") {
        NashOptions opt;
        opt.Ns = st.Ns;
        opt.replications = st.replications;
        opt.seed = st.seed;
        const NashReport r = convergence_study(sol, opt);
        json fits = json::object();
        if (st.kind == "state-gap") {
            for (const auto& row : r.rows) {
                add_row(t, row.N, "state_gap", row.state_gap, row.state_gap_se);
                add_row(t, row.N, "agent_gap", row.agent_gap, row.agent_gap_se);
                add_row(t, row.N, "second_moment", row.second_moment, 0.0);
            }
            if (r.state_fit) fits["state_gap"] = fit_json(*r.state_fit);
            if (r.agent_fit) fits["agent_gap"] = fit_json(*r.agent_fit);
            if (r.moment_fit) fits["second_moment"] = fit_json(*r.moment_fit);
        } else {
            for (const auto& row : r.rows) {
                add_row(t, row.N, "cost_gap_major", row.cost_gap0, row.cost_gap0_se);
                for (std::size_t k = 0; k < row.cost_gap.size(); ++k)
                    add_row(t, row.N, "cost_gap_type" + std::to_string(k), row.cost_gap[k], row.cost_gap_se[k]);
            }
            if (r.cost_fit0) fits["cost_gap_major"] = fit_json(*r.cost_fit0);
            for (std::size_t k = 0; k < r.cost_fit.size(); ++k)
                fits["cost_gap_type" + std::to_string(k)] = fit_json(r.cost_fit[k]);
        }
        summary["fits"] = fits;
        for (auto it = fits.begin(); it != fits.end(); ++it)
            out << "fit " << it.key() << ": slope " << fmt((*it)["slope"].get<double>()) << " ["
                << fmt((*it)["ci_low"].get<double>()) << ", " << fmt((*it)["ci_high"].get<double>()) << "]\n";
    } else {
        const bool major = st.kind == "nash-major";
        const int agent = major ? 0 : st.agent;
        json eps = json::array();
        for (int N : st.Ns) {
            const auto family = deviation_family(sol, N, agent, st.replications, st.seed);
            const PerturbationReport p =
                major ? major_perturbation(sol, N, family, st.replications, st.seed)
                      : minor_perturbation(sol, N, agent, family, st.replications, st.seed);
            for (const auto& cand : p.candidates) {
                add_row(t, N, "improvement:" + cand.label, cand.improvement, cand.se);
                add_row(t, N, "excess:" + cand.label, cand.excess, cand.excess_se);
            }
            add_row(t, N, "eps_hat", p.eps_hat, 0.0);
            add_row(t, N, "eps_excess", p.eps_excess, 0.0);
            eps.push_back({{"N", N}, {"eps_hat", p.eps_hat}, {"eps_excess", p.eps_excess}});
            out << "N=" << N << ": eps_hat " << fmt(p.eps_hat) << ", excess " << fmt(p.eps_excess) << "\n";
        }
        summary["agent"] = agent;
        summary["eps"] = eps;
    }
    write_csv(run.file(st.kind + ".csv"), t);
    run.json_file(st.kind + "-summary.json", summary);
    if (!can_fit) out << "fit refused: fits need at least four population sizes\n";
    return run.finish(kExitOk);
}

int cmd_report(const Common& c, std::ostream& out)
{
    const auto runs = read_manifests(c.out_dir);
    if (runs.empty()) {
        out << "no runs recorded in " << c.out_dir << "\n";
        return kExitOk;
    }
    for (const auto& m : runs) {
        out << m.hash << " r" << m.sequence << " " << m.command << " exit=" << m.exit_code << " J=" << m.J
            << " P=" << m.P << " M=" << m.M << " seed=" << m.seed << " " << fmt(m.wall_seconds) << "s\n";
        for (const auto& f : m.files) out << "  " << f << "\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Constrained LQG mixed mean-field game solver"};
    app.require_subcommand(1);
    Common common;
    SolveFlags sf;
    StudyFlags st;

    auto add_common = [&](CLI::App* sub, bool config) {
        if (config) sub->add_option("config", common.config, "JSON configuration file")->required();
        sub->add_option("--out", common.out_dir, "Output directory");
        sub->add_option("--threads", common.threads, "Worker threads (default MFG_THREADS)");
    };
    auto add_solver = [&](CLI::App* sub) {
        sub->add_option("--tol", sf.tol, "Picard tolerance");
        sub->add_option("--max-iter", sf.max_iter, "Picard iteration cap");
        sub->add_option("--paths", sf.paths, "Common-noise paths P");
        sub->add_option("--particles", sf.particles, "Particles per type M");
        sub->add_option("--steps", sf.steps, "Time steps J");
        sub->add_option("--seed", sf.seed, "Solver seed");
    };
    CLI::App* check = app.add_subcommand("check", "Validate a config and evaluate the well-posedness conditions");
    add_common(check, true);
    CLI::App* solve_cmd = app.add_subcommand("solve", "Solve the consistency system");
    add_common(solve_cmd, true);
    add_solver(solve_cmd);
    CLI::App* study = app.add_subcommand("study", "Population-size studies of the decentralized strategies");
    add_common(study, true);
    add_solver(study);
    study->add_option("--study", st.kind, "state-gap | cost-gap | nash-major | nash-minor");
    study->add_option("--Ns", st.Ns, "Population sizes")->delimiter(',');
    study->add_option("--reps", st.reps, "Replications per population size");
    study->add_option("--study-seed", st.seed, "Seed of the realized systems");
    study->add_option("--agent", st.agent, "Minor agent index for nash-minor");
    CLI::App* report = app.add_subcommand("report", "List recorded runs");
    add_common(report, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        set_threads(common.threads);
        if (check->parsed()) return cmd_check(common, out);
        if (solve_cmd->parsed()) return cmd_solve(common, sf, out);
        if (study->parsed()) return cmd_study(common, sf, st, out);
        return cmd_report(common, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StructuralError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace mfg

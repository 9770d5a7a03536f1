#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mft/dynamics.hpp"
#include "mft/euler_lagrange.hpp"
#include "mft/io.hpp"
#include "mft/microscopic_sim.hpp"
#include "mft/numerics.hpp"
#include "mft/quasipotential.hpp"
#include "mft/rate_functional.hpp"
#include "mft/robin_spectral.hpp"

namespace mft::cli {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"spectrum",  "solve-el", "quasipotential", "optimal-path",
                                            "verify-vs", "simulate", "hydro-check"};
    return c;
}

struct RunConfig {
    Params params;
    int grid_n = 400;
    int modes_K = 60;
    std::uint64_t seed = 42;
    std::map<std::string, double> tolerances{{"el", 1e-10}, {"eps_relax", 1e-3}};
    std::string gamma;  // input profile CSV; empty means rho_bar where allowed
    std::string out = "out";

    // optimal-path
    double T = 0.0;  // 0: run until relaxation to eps_relax
    int frames = 200;

    // simulate / hydro-check
    int N = 200;
    double sim_T = 1.0;
    double sample_dt = 0.1;
    int replicas = 1;
    int bins = 10;
    int threads = 0;  // 0: MFT_SSEP_THREADS, then hardware concurrency
    std::vector<double> times{0.01, 0.05, 0.1};

    void validate(const std::string& command) const {
        params.validate();
        if (grid_n < 4) throw ValidationError("config: grid must be >= 4");
        if (modes_K < 1) throw ValidationError("config: modes must be >= 1");
        for (const auto& [k, v] : tolerances) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("config: tolerance '" + k + "' must be positive");
        }
        if (!(T >= 0.0)) throw ValidationError("config: T must be >= 0");
        if (frames < 2) throw ValidationError("config: frames must be >= 2");
        if (N < 3) throw ValidationError("config: N must be >= 3");
        if (!(sim_T > 0.0)) throw ValidationError("config: sim_T must be > 0");
        if (!(sample_dt > 0.0)) throw ValidationError("config: sample_dt must be > 0");
        if (replicas < 1) throw ValidationError("config: replicas must be >= 1");
        if (bins < 2 || bins > N - 1) throw ValidationError("config: need 2 <= bins <= N-1");
        if (threads < 0) throw ValidationError("config: threads must be >= 0");
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!(times[k] >= 0.0) || (k > 0 && !(times[k] > times[k - 1]))) {
                throw ValidationError("config: times must be non-negative and increasing");
            }
        }
        const bool needs_gamma = command == "solve-el" || command == "quasipotential" || command == "optimal-path" ||
                                 command == "verify-vs";
        if (needs_gamma && gamma.empty()) throw ValidationError(command + ": --gamma is required");
        if (command == "hydro-check" && replicas < 8) throw ValidationError("hydro-check: need replicas >= 8");
        if (command == "hydro-check" && times.empty()) throw ValidationError("hydro-check: no times");
    }

    double tol(const std::string& name) const { return tolerances.at(name); }
};

inline json params_json(const Params& p) { return json{{"alpha", p.alpha}, {"beta", p.beta}, {"A", p.A}, {"B", p.B}}; }

inline json to_json(const RunConfig& c) {
    json tol = json::object();
    for (const auto& [k, v] : c.tolerances) tol[k] = v;
    return json{{"alpha", c.params.alpha}, {"beta", c.params.beta}, {"A", c.params.A},   {"B", c.params.B},
                {"grid", c.grid_n},        {"modes", c.modes_K},    {"seed", c.seed},    {"tolerances", tol},
                {"gamma", c.gamma},        {"out", c.out},          {"T", c.T},          {"frames", c.frames},
                {"N", c.N},                {"sim_T", c.sim_T},      {"sample_dt", c.sample_dt},
                {"replicas", c.replicas},  {"bins", c.bins},        {"threads", c.threads}, {"times", c.times}};
}

/// Applies the keys of a flat JSON object; unknown keys are rejected.
inline void apply_json(RunConfig& c, const json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "alpha") c.params.alpha = v.get<double>();
            else if (key == "beta") c.params.beta = v.get<double>();
            else if (key == "A") c.params.A = v.get<double>();
            else if (key == "B") c.params.B = v.get<double>();
            else if (key == "grid") c.grid_n = v.get<int>();
            else if (key == "modes") c.modes_K = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "tolerances") {
                for (const auto& [tk, tv] : v.items()) c.tolerances[tk] = tv.get<double>();
            } else if (key == "eps_relax") c.tolerances["eps_relax"] = v.get<double>();
            else if (key == "el_tol") c.tolerances["el"] = v.get<double>();
            else if (key == "gamma") c.gamma = v.get<std::string>();
            else if (key == "out") c.out = v.get<std::string>();
            else if (key == "T") c.T = v.get<double>();
            else if (key == "frames") c.frames = v.get<int>();
            else if (key == "N") c.N = v.get<int>();
            else if (key == "sim_T") c.sim_T = v.get<double>();
            else if (key == "sample_dt") c.sample_dt = v.get<double>();
            else if (key == "replicas") c.replicas = v.get<int>();
            else if (key == "bins") c.bins = v.get<int>();
            else if (key == "threads") c.threads = v.get<int>();
            else if (key == "times") c.times = v.get<std::vector<double>>();
            else throw ValidationError("config: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw ValidationError("config: bad value for '" + key + "': " + e.what());
        }
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("config: " + path + ": " + e.what());
    }
    RunConfig c;
    apply_json(c, j);
    return c;
}

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("MFT_SSEP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
        throw ValidationError("MFT_SSEP_THREADS must be a positive integer");
    }
    return default_threads();
}

/// Collects the artifacts of one run and writes them with a manifest.
class ArtifactWriter {
public:
    ArtifactWriter(std::string dir, std::string command, json config)
        : dir_(std::move(dir)), command_(std::move(command)), config_(std::move(config)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw ValidationError("cannot create output directory '" + dir_ + "': " + ec.message());
    }

    void text(const std::string& name, const std::string& content, const std::string& kind) {
        io::write_file((std::filesystem::path(dir_) / name).string(), content);
        files_.push_back(json{{"file", name}, {"kind", kind}});
    }

    /// JSON artifacts carry the command and the resolved config.
    void report(const std::string& name, json body) {
        json doc{{"command", command_}, {"config", config_}};
        for (auto& [k, v] : body.items()) doc[k] = v;
        text(name, doc.dump(2) + "\n", "json");
    }

    void finish(int status) {
        json m{{"command", command_}, {"status", status}, {"config", config_}, {"artifacts", files_}};
        io::write_file((std::filesystem::path(dir_) / "manifest.json").string(), m.dump(2) + "\n");
    }

private:
    std::string dir_;
    std::string command_;
    json config_;
    json files_ = json::array();
};

inline std::string profile_csv(const Profile& f) {
    std::ostringstream os;
    io::write_profile_csv(os, f);
    return os.str();
}

inline std::string path_csv(const Path& p) {
    std::ostringstream os;
    io::write_path_csv(os, p);
    return os.str();
}

inline DensityProfile load_gamma(const RunConfig& c, const Grid& grid) {
    if (c.gamma.empty()) return stationary_profile(c.params, grid);
    return DensityProfile(io::read_profile_csv(c.gamma, grid));
}

inline json breakdown_json(const RateBreakdown& r) {
    return json{{"bulk", r.bulk},   {"left", r.left},
                {"right", r.right}, {"total", r.total},
                {"control_residual", r.control_residual}, {"warnings", r.warnings}};
}

namespace commands_impl {

inline void spectrum(const RunConfig& c, ArtifactWriter& w) {
    c.params.validate();
    const SpectralBasis basis(c.params, make_grid(c.grid_n), c.modes_K);
    std::vector<double> res;
    for (double l : basis.eigenvalues()) res.push_back(eigen_residual(c.params, l));
    w.report("spectrum.json", json{{"params", params_json(c.params)},
                                   {"K", c.modes_K},
                                   {"eigenvalues", basis.eigenvalues()},
                                   {"residuals", res},
                                   {"c0", basis.c0()},
                                   {"c1", basis.c1()}});
}

inline void solve_el_cmd(const RunConfig& c, ArtifactWriter& w) {
    const DensityProfile gamma = load_gamma(c, make_grid(c.grid_n));
    const ElSolution el = solve_el(gamma, c.params, c.tol("el"));
    w.text("F.csv", profile_csv(el.F), "profile");
    w.report("solve_el.json", json{{"iterations", el.iterations},
                                   {"residual_c1", el.residual_c1},
                                   {"p", el.p},
                                   {"q", el.q},
                                   {"el_residual_linf", norm(el_residual(el.F, gamma), NormKind::Linf)}});
}

inline void quasipotential_cmd(const RunConfig& c, ArtifactWriter& w) {
    const DensityProfile gamma = load_gamma(c, make_grid(c.grid_n));
    const QuasiPotentialReport r = s0(gamma, c.params, c.tol("el"));
    w.text("F.csv", profile_csv(r.F), "profile");
    w.report("quasipotential.json", json{{"s0", r.s0_gamma},
                                         {"s0_rho", r.s0_rho},
                                         {"s", r.s},
                                         {"hj_residual", r.hj_residual},
                                         {"iterations", r.iterations}});
}

inline void optimal_path_cmd(const RunConfig& c, ArtifactWriter& w) {
    c.params.require_nondegenerate();
    const DensityProfile gamma = load_gamma(c, make_grid(c.grid_n));
    const AdjointEvaluator ev(gamma, c.params, c.modes_K, c.tol("el"));
    double T = c.T;
    if (T == 0.0) {
        const auto T1 = relaxation_time(ev, c.tol("eps_relax"), 50.0);
        if (!T1) throw NumericalError("optimal-path: no relaxation to eps_relax within t = 50");
        T = *T1;
    }
    const AdjointSolution adj = adjoint_path(ev, geometric_times(T, c.frames));
    w.text("v_path.csv", path_csv(adj.v_path), "path");
    w.text("F_path.csv", path_csv(adj.F_path), "path");
    json series = json::array();
    for (std::size_t k = 0; k < adj.effective.size(); ++k) {
        const auto& e = adj.effective[k];
        series.push_back(json{{"t", adj.v_path.times[k]},
                              {"alpha_star", e.alpha_star},
                              {"beta_star", e.beta_star},
                              {"A_star", e.A_star},
                              {"B_star", e.B_star}});
    }
    w.report("effective.json", json{{"T", T},
                                    {"v_min", adj.v_min},
                                    {"v_max", adj.v_max},
                                    {"relax_distance", sup_distance(adj.v_path.frames.back(), ev.rho())},
                                    {"warnings", adj.warnings},
                                    {"effective", series}});
}

inline void verify_vs_cmd(const RunConfig& c, ArtifactWriter& w) {
    const DensityProfile gamma = load_gamma(c, make_grid(c.grid_n));
    VsOptions opt;
    opt.K = c.modes_K;
    opt.el_tol = c.tol("el");
    const VsReport r = verify_v_equals_s(gamma, c.params, c.tol("eps_relax"), opt);
    w.report("verify_vs.json", json{{"S", r.S},
                                    {"upper", r.upper},
                                    {"lower", r.lower},
                                    {"gap", r.gap},
                                    {"relative_gap", r.relative_gap},
                                    {"T1", r.T1},
                                    {"relax_distance", r.relax_distance},
                                    {"adjoint_rate", breakdown_json(r.adjoint_rate)},
                                    {"s0_drop", r.s0_drop},
                                    {"connecting_cost", r.connecting_cost},
                                    {"connecting_basket_lower", r.connecting_basket_lower},
                                    {"connecting_bound", r.connecting_bound},
                                    {"connecting_sup_distance", r.connecting_sup_distance},
                                    {"connecting_threshold", r.connecting_threshold},
                                    {"hypothesis_satisfied", r.hypothesis_satisfied}});
}

inline void simulate_cmd(const RunConfig& c, ArtifactWriter& w) {
    const DensityProfile gamma = load_gamma(c, make_grid(c.grid_n));
    SimOptions opt;
    opt.bins = c.bins;
    const auto ts = sim_detail::sample_grid(c.sim_T, c.sample_dt);
    const auto runs = simulate_replicas(c.params, c.N, gamma, ts, c.seed, c.replicas, resolve_threads(c.threads), opt);
    const BinStatistics st = bin_statistics(runs);
    std::ostringstream os;
    os << "t,bin,mean,stderr\n";
    for (std::size_t k = 0; k < st.times.size(); ++k) {
        for (std::size_t b = 0; b < st.mean[k].size(); ++b) {
            os << io::fmt17(st.times[k]) << ',' << b << ',' << io::fmt17(st.mean[k][b]) << ','
               << io::fmt17(st.se[k][b]) << '\n';
        }
    }
    w.text("simulate.csv", os.str(), "bins");
    json reps = json::array();
    for (const auto& r : runs) {
        reps.push_back(json{{"seed", r.seed}, {"event_count", r.event_count}, {"rate_checks", r.rate_checks}});
    }
    w.report("simulate.json", json{{"generator", "splitmix64"},
                                   {"seed", c.seed},
                                   {"N", c.N},
                                   {"T", c.sim_T},
                                   {"sample_dt", c.sample_dt},
                                   {"bins", c.bins},
                                   {"bin_centres", site_bin_average(c.N, c.bins, [](double x) { return x; })},
                                   {"replicas", reps}});
}

inline void hydro_check_cmd(const RunConfig& c, ArtifactWriter& w) {
    const DensityProfile gamma = load_gamma(c, make_grid(c.grid_n));
    const HydroReport r = hydrodynamic_check(c.params, c.N, gamma, c.times, c.replicas, c.seed, c.bins,
                                             resolve_threads(c.threads), c.modes_K);
    json per = json::array();
    for (const auto& t : r.per_time) {
        per.push_back(json{{"t", t.t},
                           {"discrepancy", t.discrepancy},
                           {"max_stderr", t.max_se},
                           {"max_z", t.max_z},
                           {"mean", t.mean},
                           {"stderr", t.se},
                           {"pde", t.pde}});
    }
    w.report("hydro_check.json", json{{"generator", "splitmix64"},
                                      {"seed", r.seed},
                                      {"N", r.N},
                                      {"replicas", r.replicas},
                                      {"within_3se", r.within_3se},
                                      {"per_time", per}});
}

}  // namespace commands_impl

/// Exit status: 0 success, 1 invalid input, 2 numerical failure.
enum Status : int { kOk = 0, kInvalid = 1, kNumerical = 2 };

struct RunOutcome {
    int status = kOk;
    std::string message;
};

/**
 * @brief Runs one command and writes its artifacts plus manifest.json under config.out.
 *
 * Failures are written as error.json (with the residual history when the
 * failure was a non-convergence) and reflected in the returned status.
 */
inline RunOutcome run(const std::string& command, const RunConfig& config) {
    RunOutcome out;
    std::unique_ptr<ArtifactWriter> w;
    try {
        if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
            throw ValidationError("unknown command '" + command + "'");
        }
        config.validate(command);
        w = std::make_unique<ArtifactWriter>(config.out, command, to_json(config));
        if (command == "spectrum") commands_impl::spectrum(config, *w);
        else if (command == "solve-el") commands_impl::solve_el_cmd(config, *w);
        else if (command == "quasipotential") commands_impl::quasipotential_cmd(config, *w);
        else if (command == "optimal-path") commands_impl::optimal_path_cmd(config, *w);
        else if (command == "verify-vs") commands_impl::verify_vs_cmd(config, *w);
        else if (command == "simulate") commands_impl::simulate_cmd(config, *w);
        else commands_impl::hydro_check_cmd(config, *w);
        w->finish(kOk);
        return out;
    } catch (const ValidationError& e) {
        out = {kInvalid, e.what()};
        if (w) w->report("error.json", json{{"status", kInvalid}, {"error", e.what()}});
    } catch (const NonConvergenceError& e) {
        out = {kNumerical, e.what()};
        if (w) w->report("error.json", json{{"status", kNumerical}, {"error", e.what()}, {"history", e.history()}});
    } catch (const NumericalError& e) {
        out = {kNumerical, e.what()};
        if (w) w->report("error.json", json{{"status", kNumerical}, {"error", e.what()}});
    }
    if (w) w->finish(out.status);
    return out;
}

}  // namespace mft::cli

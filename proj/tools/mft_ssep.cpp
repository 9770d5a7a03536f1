#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "mft/cli.hpp"

namespace {

// Flag values are copied into the config only when given, so they override the config file.
template <class T>
void override_if(const CLI::Option* opt, T& target, const T& value) {
    if (opt->count() > 0) target = value;
}

}  // namespace

int main(int argc, char** argv) {
    using mft::cli::RunConfig;

    CLI::App app{"Quasi-potential toolkit for the boundary-driven exclusion process"};
    app.require_subcommand(1, 1);
    app.fallthrough();  // subcommands inherit this, so flags may follow the command name

    std::string config_path;
    RunConfig f;  // flag storage
    double eps_relax = 1e-3, el_tol = 1e-10;

    app.add_option("--config", config_path, "JSON config file (flat keys mirroring the flags)");
    auto* o_alpha = app.add_option("--alpha", f.params.alpha, "left reservoir density");
    auto* o_beta = app.add_option("--beta", f.params.beta, "right reservoir density");
    auto* o_A = app.add_option("--A", f.params.A, "left coupling");
    auto* o_B = app.add_option("--B", f.params.B, "right coupling");
    auto* o_grid = app.add_option("--grid", f.grid_n, "grid intervals (default 400)");
    auto* o_modes = app.add_option("--modes", f.modes_K, "Robin modes (default 60)");
    auto* o_seed = app.add_option("--seed", f.seed, "random seed (default 42)");
    auto* o_gamma = app.add_option("--gamma", f.gamma, "input profile CSV (x,value)");
    auto* o_out = app.add_option("--out", f.out, "artifact directory");
    auto* o_eps = app.add_option("--eps-relax", eps_relax, "relaxation threshold");
    auto* o_eltol = app.add_option("--el-tol", el_tol, "Euler-Lagrange C1 tolerance");
    auto* o_T = app.add_option("--T", f.T, "optimal-path horizon (0: relax to eps-relax); simulate: run length");
    auto* o_frames = app.add_option("--frames", f.frames, "optimal-path frames");
    auto* o_N = app.add_option("--N", f.N, "lattice scaling parameter");
    auto* o_dt = app.add_option("--sample-dt", f.sample_dt, "sampling interval");
    auto* o_reps = app.add_option("--replicas", f.replicas, "independent replicas");
    auto* o_bins = app.add_option("--bins", f.bins, "histogram bins");
    auto* o_threads = app.add_option("--threads", f.threads, "worker cap (fallback MFT_SSEP_THREADS)");
    auto* o_times = app.add_option("--times", f.times, "hydro-check sampling times");

    for (const auto& c : mft::cli::commands()) app.add_subcommand(c, "run " + c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return e.get_exit_code() == 0 ? app.exit(e) : (app.exit(e), mft::cli::kInvalid);
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = mft::cli::load_config(config_path);
    } catch (const mft::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mft::cli::kInvalid;
    }
    override_if(o_alpha, cfg.params.alpha, f.params.alpha);
    override_if(o_beta, cfg.params.beta, f.params.beta);
    override_if(o_A, cfg.params.A, f.params.A);
    override_if(o_B, cfg.params.B, f.params.B);
    override_if(o_grid, cfg.grid_n, f.grid_n);
    override_if(o_modes, cfg.modes_K, f.modes_K);
    override_if(o_seed, cfg.seed, f.seed);
    override_if(o_gamma, cfg.gamma, f.gamma);
    override_if(o_out, cfg.out, f.out);
    if (o_eps->count() > 0) cfg.tolerances["eps_relax"] = eps_relax;
    if (o_eltol->count() > 0) cfg.tolerances["el"] = el_tol;
    if (o_T->count() > 0) {
        if (command == "simulate") cfg.sim_T = f.T;
        else cfg.T = f.T;
    }
    override_if(o_frames, cfg.frames, f.frames);
    override_if(o_N, cfg.N, f.N);
    override_if(o_dt, cfg.sample_dt, f.sample_dt);
    override_if(o_reps, cfg.replicas, f.replicas);
    override_if(o_bins, cfg.bins, f.bins);
    override_if(o_threads, cfg.threads, f.threads);
    override_if(o_times, cfg.times, f.times);

    const auto outcome = mft::cli::run(command, cfg);
    if (outcome.status != mft::cli::kOk) {
        std::cerr << "error: " << outcome.message << '\n';
    } else {
        std::cout << "wrote " << cfg.out << "/manifest.json\n";
    }
    return outcome.status;
}

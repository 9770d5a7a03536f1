#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"

#include "mft/cli.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mft_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

struct Exec {
    int status;
    std::string err;
};

Exec ssep(const std::string& args, const fs::path& dir) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(MFT_SSEP_BIN) + " " + args + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err)};
}

std::string data(const std::string& name) { return (fs::path(MFT_DATA_DIR) / name).string(); }

}  // namespace

TEST(Cli, QuasipotentialOfStationaryIsZero) {
    const auto dir = scratch("qp");
    const auto r = ssep("quasipotential --gamma " + data("rho_bar.csv") + " --out " + (dir / "out").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const json j = load(dir / "out" / "quasipotential.json");
    EXPECT_NEAR(j["s"].get<double>(), 0.0, 1e-8);
    EXPECT_TRUE(fs::exists(dir / "out" / "F.csv"));
}

TEST(Cli, VerifyVsOnBumpCloses) {
    const auto dir = scratch("vs");
    const auto r = ssep("verify-vs --gamma " + data("bump.csv") + " --eps-relax 1e-3 --out " + (dir / "out").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    const json j = load(dir / "out" / "verify_vs.json");
    EXPECT_LT(std::abs(j["gap"].get<double>()), 0.02);
    EXPECT_LT(std::abs(j["relative_gap"].get<double>()), 0.02);
    for (const char* key : {"S", "upper", "T1", "connecting_cost"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Cli, MalformedCsvCitesLine) {
    const auto dir = scratch("bad");
    std::ofstream(dir / "bad.csv") << "x,value\n0,0.4\n0.5,abc\n1,0.6\n";
    const auto r = ssep("solve-el --gamma " + (dir / "bad.csv").string() + " --out " + (dir / "out").string(), dir);
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
    const json m = load(dir / "out" / "manifest.json");
    EXPECT_EQ(m["status"], 1);
    EXPECT_TRUE(fs::exists(dir / "out" / "error.json"));

    std::ofstream(dir / "hdr.csv") << "x;value\n0,0.4\n";
    EXPECT_EQ(ssep("solve-el --gamma " + (dir / "hdr.csv").string() + " --out " + (dir / "o2").string(), dir).status, 1);
}

TEST(Cli, InvalidInputsExitOne) {
    const auto dir = scratch("invalid");
    EXPECT_EQ(ssep("spectrum --alpha 0.9 --beta 0.1 --out " + (dir / "a").string(), dir).status, 1);
    EXPECT_EQ(ssep("solve-el --out " + (dir / "b").string(), dir).status, 1);
    EXPECT_EQ(ssep("spectrum --modes abc", dir).status, 1);
    EXPECT_EQ(ssep("nosuch", dir).status, 1);
    std::ofstream(dir / "cfg.json") << R"({"alpha": 0.2, "bogus": 1})";
    EXPECT_EQ(ssep("spectrum --config " + (dir / "cfg.json").string() + " --out " + (dir / "c").string(), dir).status, 1);
}

TEST(Cli, NonConvergenceExitsTwoWithHistory) {
    mft::cli::RunConfig c;
    const auto dir = scratch("nonconv");
    c.gamma = data("bump.csv");
    c.out = (dir / "out").string();
    c.tolerances["el"] = 1e-300;
    const auto r = mft::cli::run("solve-el", c);
    EXPECT_EQ(r.status, 2);
    const json e = load(dir / "out" / "error.json");
    EXPECT_FALSE(e["history"].empty());
    EXPECT_EQ(load(dir / "out" / "manifest.json")["status"], 2);
}

TEST(Cli, IdenticalRunsAreByteIdentical) {
    const auto dir = scratch("repro");
    const std::string out = (dir / "out").string();
    const std::string sim = "simulate --gamma " + data("rho_bar.csv") +
                            " --N 60 --T 0.2 --sample-dt 0.05 --replicas 3 --seed 9 --out " + out + "/sim";
    const std::string path =
        "optimal-path --gamma " + data("bump.csv") + " --grid 100 --modes 30 --frames 20 --out " + out + "/path";
    const std::vector<std::string> files{"sim/simulate.csv", "sim/simulate.json", "sim/manifest.json",
                                         "path/v_path.csv",  "path/F_path.csv",   "path/effective.json",
                                         "path/manifest.json"};
    std::vector<std::string> first;
    for (int pass = 0; pass < 2; ++pass) {
        ASSERT_EQ(ssep(sim + " --threads 2", dir).status, 0);
        ASSERT_EQ(ssep(path, dir).status, 0);
        for (std::size_t k = 0; k < files.size(); ++k) {
            const std::string now = slurp(dir / "out" / files[k]);
            ASSERT_FALSE(now.empty()) << files[k];
            if (pass == 0) first.push_back(now);
            else EXPECT_EQ(first[k], now) << files[k];
        }
    }
    // The worker count only changes scheduling, never the samples.
    ASSERT_EQ(ssep(sim + " --threads 1", dir).status, 0);
    EXPECT_EQ(first[0], slurp(dir / "out" / files[0]));
}

TEST(Cli, ArtifactsEmbedResolvedConfig) {
    const auto dir = scratch("cfg");
    std::ofstream(dir / "cfg.json") << R"({"alpha": 0.3, "beta": 0.4, "A": 0.5, "B": 2, "modes": 20})";
    const std::string out = (dir / "out").string();
    ASSERT_EQ(ssep("spectrum --config " + (dir / "cfg.json").string() + " --modes 25 --out " + out, dir).status, 0);
    const json m = load(dir / "out" / "manifest.json");
    EXPECT_EQ(m["command"], "spectrum");
    EXPECT_EQ(m["status"], 0);
    EXPECT_DOUBLE_EQ(m["config"]["alpha"].get<double>(), 0.3);
    EXPECT_EQ(m["config"]["modes"], 25);
    ASSERT_FALSE(m["artifacts"].empty());
    for (const auto& a : m["artifacts"]) {
        const std::string f = a["file"];
        if (a["kind"] == "json") {
            EXPECT_EQ(load(dir / "out" / f)["config"], m["config"]) << f;
        }
    }
    const json s = load(dir / "out" / "spectrum.json");
    EXPECT_EQ(s["eigenvalues"].size(), 25u);
    for (const auto& r : s["residuals"]) EXPECT_LT(r.get<double>(), 1e-10);
}

TEST(Cli, ThreadsEnvironmentFallback) {
    ::setenv("MFT_SSEP_THREADS", "3", 1);
    EXPECT_EQ(mft::cli::resolve_threads(0), 3);
    EXPECT_EQ(mft::cli::resolve_threads(2), 2);
    ::setenv("MFT_SSEP_THREADS", "x", 1);
    EXPECT_THROW(mft::cli::resolve_threads(0), mft::ValidationError);
    ::unsetenv("MFT_SSEP_THREADS");
    EXPECT_GE(mft::cli::resolve_threads(0), 1);
}

TEST(Cli, HydroCheckReport) {
    mft::cli::RunConfig c;
    const auto dir = scratch("hydro");
    c.gamma = data("rho_bar.csv");
    c.out = (dir / "out").string();
    c.N = 60;
    c.replicas = 8;
    c.times = {0.0, 0.05};
    c.threads = 1;
    ASSERT_EQ(mft::cli::run("hydro-check", c).status, 0);
    const json j = load(dir / "out" / "hydro_check.json");
    EXPECT_EQ(j["per_time"].size(), 2u);
    c.replicas = 4;
    EXPECT_EQ(mft::cli::run("hydro-check", c).status, 1);
}

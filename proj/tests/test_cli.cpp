#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

#ifndef TEST_CLI_BIN
#error "TEST_CLI_BIN must point at the CLI executable"
#endif

const std::string kBinary = TEST_CLI_BIN;

int run(const std::string& args) {
    const std::string cmd = kBinary + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    if (raw == -1) return -1;
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("bn2mf_cli_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& sub = "") const {
        return (sub.empty() ? path : path / sub).string();
    }
};

}  // namespace

TEST_CASE("simulate writes all artifacts and is byte-stable") {
    TempDir dir("sim");
    const std::string flags = "--n 40 --p 8 --k 2 --distinct 10 --noise 0.3 --seed 5";
    REQUIRE(run("simulate --out " + dir.str("a") + " " + flags) == 0);
    for (const char* name :
         {"data.csv", "x_clean.csv", "scores_true.csv", "loadings_true.csv", "sim_spec.txt"})
        CHECK(fs::exists(dir.path / "a" / name));

    REQUIRE(run("simulate --out " + dir.str("b") + " " + flags) == 0);
    CHECK(slurp(dir.path / "a" / "data.csv") == slurp(dir.path / "b" / "data.csv"));
    CHECK(slurp(dir.path / "a" / "sim_spec.txt") == slurp(dir.path / "b" / "sim_spec.txt"));
}

TEST_CASE("fit produces reports and factor files") {
    TempDir dir("fit");
    REQUIRE(run("simulate --out " + dir.str("sim") +
                " --n 50 --p 6 --k 2 --noise 0.2 --seed 3") == 0);
    REQUIRE(run("fit --data " + dir.str("sim/data.csv") + " --out " + dir.str("out") +
                " --restarts 2 --max-sweeps 1500 --seed 4 --threads 2") == 0);
    for (const char* name : {"scores.csv", "loadings.csv", "scaled_scores.csv",
                             "normalized_loadings.csv", "elbo_trace.csv", "report.json"})
        CHECK(fs::exists(dir.path / "out" / name));
    const std::string report = slurp(dir.path / "out" / "report.json");
    CHECK(report.find("k_effective") != std::string::npos);
    CHECK(report.find("elbo") != std::string::npos);

    // Identical invocation gives identical artifacts.
    REQUIRE(run("fit --data " + dir.str("sim/data.csv") + " --out " + dir.str("out2") +
                " --restarts 2 --max-sweeps 1500 --seed 4 --threads 2") == 0);
    CHECK(slurp(dir.path / "out" / "scores.csv") == slurp(dir.path / "out2" / "scores.csv"));
    CHECK(slurp(dir.path / "out" / "report.json") == slurp(dir.path / "out2" / "report.json"));
}

TEST_CASE("usage and input errors exit with code 1") {
    TempDir dir("err");
    CHECK(run("fit") == 1);                       // missing required flags
    CHECK(run("no-such-command") == 1);           // unknown subcommand
    CHECK(run("fit --data /nope.csv --out " + dir.str("x")) == 1);

    std::ofstream bad(dir.path / "bad.csv");
    bad << "id,a,b\nr1,1,-2\n";
    bad.close();
    CHECK(run("fit --data " + dir.str("bad.csv") + " --out " + dir.str("y")) == 1);
}

TEST_CASE("baselines and ci commands run end to end") {
    TempDir dir("base");
    REQUIRE(run("simulate --out " + dir.str("sim") +
                " --n 60 --p 6 --k 2 --noise 0.2 --seed 9") == 0);
    REQUIRE(run("baselines --data " + dir.str("sim/data.csv") + " --out " + dir.str("nmf") +
                " --method nmf-l2 --k-candidates 1,2,3 --seed 2") == 0);
    const std::string report = slurp(dir.path / "nmf" / "report.json");
    CHECK(report.find("\"k\": 2") != std::string::npos);

    REQUIRE(run("baselines --data " + dir.str("sim/data.csv") + " --out " + dir.str("pca") +
                " --method pca --variance-threshold 0.8") == 0);
    CHECK(fs::exists(dir.path / "pca" / "loadings.csv"));

    REQUIRE(run("ci --data " + dir.str("sim/data.csv") + " --out " + dir.str("ci") +
                " --restarts 2 --max-sweeps 1500 --draws 200 --seed 6") == 0);
    for (const char* name : {"ci_lower.csv", "ci_mean.csv", "ci_upper.csv", "report.json"})
        CHECK(fs::exists(dir.path / "ci" / name));
}

TEST_CASE("bootstrap command emits interval files") {
    TempDir dir("boot");
    REQUIRE(run("simulate --out " + dir.str("sim") +
                " --n 30 --p 6 --k 2 --noise 0.2 --seed 12") == 0);
    REQUIRE(run("bootstrap --data " + dir.str("sim/data.csv") + " --out " + dir.str("out") +
                " --fitter nmf-p --k 2 --boot 12 --seed 3 --max-sweeps 500") == 0);
    for (const char* name :
         {"boot_lower.csv", "boot_mean.csv", "boot_upper.csv", "boot_missing.csv"})
        CHECK(fs::exists(dir.path / "out" / name));
}

TEST_CASE("grid runs, resumes with no recomputation, and reports") {
    TempDir dir("grid");
    const std::string flags = " --structures 10 --noise 0.2,0.5 --replicates 2 --n 50 --p 6"
                              " --k-true 2 --methods bn2mf,pca --k-candidates 1,2,3"
                              " --restarts 2 --max-sweeps 1500 --ci-draws 100 --jobs 2 --seed 8";
    REQUIRE(run("grid --out " + dir.str("g") + flags) == 0);
    int files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir.path / "g" / "cells"))
        if (entry.path().extension() == ".json") ++files;
    CHECK(files == 4);  // 1 structure x 2 noise x 2 replicates

    const std::string before = slurp(dir.path / "g" / "cells" / "d10_n020" / "rep0000.json");
    REQUIRE(run("grid --out " + dir.str("g") + flags) == 0);
    CHECK(slurp(dir.path / "g" / "cells" / "d10_n020" / "rep0000.json") == before);
    const std::string log = slurp(dir.path / "g" / "run.log");
    CHECK(log.find("0 replicate(s) to run") != std::string::npos);

    REQUIRE(run("report --grid-dir " + dir.str("g") + " --out " + dir.str("tables")) == 0);
    for (const char* name : {"relative_error.csv", "cosine.csv", "subspace.csv",
                             "coverage_grid.csv", "rank_selection.csv"})
        CHECK(fs::exists(dir.path / "tables" / name));

    // 2 methods x 1 structure x 2 noise levels plus a header.
    std::ifstream in(dir.path / "tables" / "relative_error.csv");
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 5);
}

TEST_CASE("config files supply defaults that flags override") {
    TempDir dir("cfg");
    REQUIRE(run("simulate --out " + dir.str("sim") +
                " --n 40 --p 6 --k 2 --noise 0.2 --seed 2") == 0);
    {
        std::ofstream cfg(dir.path / "run.cfg");
        cfg << "# fit settings\n";
        cfg << "data = sim/data.csv\n";  // resolved against the config dir
        cfg << "out = from_config\n";
        cfg << "restarts = 2\n";
        cfg << "max-sweeps = 1200\n";
        cfg << "seed = 11\n";
    }
    REQUIRE(run("fit --config " + dir.str("run.cfg")) == 0);
    CHECK(fs::exists(dir.path / "from_config" / "report.json"));

    // The explicit flag beats the config value.
    REQUIRE(run("fit --config " + dir.str("run.cfg") + " --out " + dir.str("explicit")) == 0);
    CHECK(fs::exists(dir.path / "explicit" / "report.json"));

    {
        std::ofstream cfg(dir.path / "bad.cfg");
        cfg << "data = sim/data.csv\nout = x\nnot-a-real-key = 1\n";
    }
    CHECK(run("fit --config " + dir.str("bad.cfg")) == 1);
}

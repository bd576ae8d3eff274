#include <gtest/gtest.h>

#include <jkmap/jkmap.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace jkmap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("jkmap_" + tag + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliResult {
    int code = -1;
    std::string out;
};

CliResult cli(const std::string& args) {
    const std::string cmd = std::string(JKMAP_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    CliResult r;
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

ScenarioConfig small_mc(const std::string& name, int j, int k, std::size_t iterations) {
    ScenarioConfig c = bundled_scenario("interval_u_k4_j2");
    c.name = name;
    c.j = j;
    c.k = k;
    c.particles = 3000;
    c.iterations = iterations;
    c.sample_cap = 500;
    return c;
}

RunOptions quiet(const fs::path& root, std::size_t threads = 2) {
    RunOptions o;
    o.output_root = root;
    o.threads = threads;
    return o;
}

}  // namespace

TEST(Scenarios, BundledSet) {
    const auto all = bundled_scenarios();
    std::size_t tencube = 0, interval_u = 0;
    for (const auto& c : all) {
        tencube += c.name.rfind("tencube_", 0) == 0;
        interval_u += c.name.rfind("interval_u_", 0) == 0;
    }
    EXPECT_EQ(tencube, 8u);
    EXPECT_EQ(interval_u, 20u);
    for (const char* name : {"paper-5pt", "paper-R2", "paper-0.4-0.6", "ninepoint_k10", "interval_tilted", "interval_more_tilted",
                             "circle_uniform_k4", "circle_disc_k4"})
        EXPECT_NO_THROW(bundled_scenario(name)) << name;
    EXPECT_THROW(bundled_scenario("nope"), InvalidInput);
    const auto nine = bundled_scenario("ninepoint_k10");
    EXPECT_EQ(nine.engine, Engine::exact);
    EXPECT_EQ(nine.space.finite_size(), 9u);
}

TEST(ScenariosProperty, JsonRoundTripIsLossless) {
    for (const auto& c : bundled_scenarios()) {
        const auto j1 = to_json(c);
        const auto back = scenario_from_json(nlohmann::json::parse(j1.dump()));
        EXPECT_EQ(to_json(back), j1) << c.name;
    }
}

TEST(Scenarios, ShippedFilesMatchBundled) {
    const fs::path dir = fs::path(JKMAP_SOURCE_DIR) / "scenarios";
    std::size_t seen = 0;
    for (const auto& c : bundled_scenarios()) {
        const auto p = dir / (c.name + ".json");
        ASSERT_TRUE(fs::exists(p)) << p;
        EXPECT_EQ(read_json(p), to_json(c)) << c.name;
        ++seen;
    }
    EXPECT_EQ(seen, bundled_scenarios().size());
}

TEST(Scenarios, ValidationErrors) {
    auto base = to_json(bundled_scenario("interval_u_k4_j1"));
    auto bad = base;
    bad["j"] = 5;
    EXPECT_THROW(scenario_from_json(bad), InvalidInput);
    bad = base;
    bad["engine"] = "exact";
    EXPECT_THROW(scenario_from_json(bad), InvalidInput);
    bad = base;
    bad.erase("space");
    EXPECT_THROW(scenario_from_json(bad), InvalidInput);
    bad = base;
    bad["colour"] = "blue";
    EXPECT_THROW(scenario_from_json(bad), InvalidInput);
    bad = base;
    bad["k"] = "four";
    EXPECT_THROW(scenario_from_json(bad), InvalidInput);
    bad = base;
    bad["initial"] = {{"type", "uniform_circle"}};
    EXPECT_THROW(scenario_from_json(bad), InvalidInput);
    EXPECT_THROW(scenario_from_json(nlohmann::json::array()), InvalidInput);
}

TEST(Run, DirectoryLayout) {
    TempDir tmp("layout");
    const auto c = small_mc("layout", 1, 4, 3);
    const auto a = run_iterative(c, quiet(tmp.path));
    EXPECT_EQ(a.dir, tmp.path / "layout");
    EXPECT_EQ(a.completed, 3u);
    EXPECT_EQ(a.summaries.size(), 4u);
    for (const char* f : {"config.json", "summaries.csv", "run.json", "state/population.csv"}) EXPECT_TRUE(fs::exists(a.dir / f)) << f;
    EXPECT_FALSE(fs::exists(a.dir / "run.lock"));
    for (int n = 0; n <= 3; ++n) {
        const auto it = a.dir / ("iter_" + std::to_string(n));
        EXPECT_TRUE(fs::exists(it / "summary.json"));
        EXPECT_EQ(csv::read_table(it / "samples.csv").size(), 500u);  // header skipped
    }
    const auto meta = read_json(a.dir / "run.json");
    EXPECT_EQ(meta["completed_iterations"], 3);
    EXPECT_EQ(meta["timing"]["per_iteration_seconds"].size(), 3u);
    EXPECT_EQ(scenario_from_json(read_json(a.dir / "config.json")).name, "layout");
}

TEST(Run, OutputRootFromEnvironment) {
    TempDir tmp("envroot");
    ::setenv("JKMAP_OUTPUT_ROOT", tmp.path.c_str(), 1);
    RunOptions o;
    o.threads = 1;
    const auto a = run_iterative(small_mc("envrun", 1, 2, 1), o);
    ::unsetenv("JKMAP_OUTPUT_ROOT");
    EXPECT_EQ(a.dir, tmp.path / "envrun");
    EXPECT_TRUE(fs::exists(tmp.path / "envrun" / "summaries.csv"));
}

TEST(RunProperty, ConfigEchoReproducesBitExactly) {
    TempDir tmp("repro");
    const auto a = run_iterative(small_mc("first", 2, 4, 4), quiet(tmp.path, 1));
    auto echo = scenario_from_json(read_json(a.dir / "config.json"));
    echo.name = "second";
    const auto b = run_iterative(echo, quiet(tmp.path, 4));
    EXPECT_EQ(slurp(a.dir / "summaries.csv"), slurp(b.dir / "summaries.csv"));
    EXPECT_EQ(slurp(a.dir / "iter_4" / "samples.csv"), slurp(b.dir / "iter_4" / "samples.csv"));
}

TEST(RunProperty, ResumeMatchesUninterrupted) {
    TempDir tmp("resume");
    for (const auto& base : {small_mc("mc", 3, 4, 5), bundled_scenario("paper-5pt")}) {
        auto c = base;
        c.iterations = 5;
        c.name = base.name + "_full";
        const auto full = run_iterative(c, quiet(tmp.path));
        c.name = base.name + "_cut";
        auto opt = quiet(tmp.path);
        opt.stop_after = 2;
        const auto cut = run_iterative(c, opt);
        EXPECT_EQ(cut.completed, 2u);
        const auto resumed = resume_run(cut.dir, quiet(tmp.path));
        EXPECT_EQ(resumed.completed, 5u);
        EXPECT_EQ(slurp(full.dir / "summaries.csv"), slurp(cut.dir / "summaries.csv")) << base.name;
        // raising the target continues from the saved state
        const auto more = resume_run(cut.dir, quiet(tmp.path), 6);
        EXPECT_EQ(more.completed, 6u);
        EXPECT_EQ(read_summaries(cut.dir, 6).size(), 7u);
    }
}

TEST(Run, LiveLockRefused) {
    TempDir tmp("lock");
    const auto c = small_mc("locked", 1, 2, 2);
    const auto dir = tmp.path / "locked";
    run_iterative(c, quiet(tmp.path));
    std::ofstream(dir / "run.lock") << ::getpid() << '\n';
    EXPECT_THROW(run_iterative(c, quiet(tmp.path)), IoError);
    EXPECT_THROW(resume_run(dir, quiet(tmp.path), 3), IoError);
    EXPECT_TRUE(fs::exists(dir / "run.lock"));
    fs::remove(dir / "run.lock");
}

TEST(Run, StaleLockReplaced) {
    TempDir tmp("stale");
    const auto c = small_mc("stale", 1, 2, 2);
    fs::create_directories(tmp.path / "stale");
    // a pid that cannot be running
    std::ofstream(tmp.path / "stale" / "run.lock") << 2147483000L << '\n';
    const auto a = run_iterative(c, quiet(tmp.path));
    EXPECT_EQ(a.completed, 2u);
    EXPECT_FALSE(fs::exists(a.dir / "run.lock"));
}

TEST(Run, PointMassIsConstantAndOnePoint) {
    TempDir tmp("pm");
    auto c = small_mc("pm", 2, 4, 4);
    c.initial = initial::PointMass{{0.3}};
    const auto a = run_iterative(c, quiet(tmp.path));
    for (const auto& s : a.summaries) {
        EXPECT_EQ(s.mean[0], 0.3);
        EXPECT_EQ(s.sd, 0.0);
    }
    ASSERT_TRUE(a.classification);
    EXPECT_EQ(a.classification->kind, LimitKind::one_point);
    EXPECT_EQ(a.classification->locations, std::vector<double>{0.3});
    const auto again = classify_run(a.dir);
    EXPECT_EQ(again.kind, LimitKind::one_point);
    EXPECT_EQ(read_json(a.dir / "run.json")["classification"]["kind"], "one_point");
}

TEST(Run, ExactEngineWritesWeights) {
    TempDir tmp("exact");
    auto c = bundled_scenario("paper-0.4-0.6");
    c.iterations = 3;
    const auto a = run_iterative(c, quiet(tmp.path));
    const auto t = csv::read_table(a.dir / "iter_3" / "weights.csv");
    ASSERT_EQ(t.size(), 4u);
    for (const auto& row : t) EXPECT_NEAR(row[1], 0.25, 1e-12);
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli("--help").code, 0);
    EXPECT_EQ(cli("binomial classify --j 4").code, 2);
    EXPECT_EQ(cli("binomial frobnicate").code, 2);
    EXPECT_EQ(cli("binomial classify --j 5 --k 4").code, 3);
    EXPECT_EQ(cli("finite stationary --scenario nope").code, 3);
    EXPECT_EQ(cli("mc resume /nonexistent/jkmap_run").code, 4);
}

TEST(Cli, BinomialOutputs) {
    const auto c = cli("binomial classify --j 4 --k 5");
    EXPECT_EQ(c.code, 0);
    EXPECT_EQ(c.out, "type=III p_crit=0.17267\n");
    EXPECT_EQ(cli("binomial map --p 0.5 --j 3 --k 7").out, "0.5\n");
    const auto t = cli("binomial table --kmax 9");
    EXPECT_EQ(std::count(t.out.begin(), t.out.end(), '\n'), 45);  // header + 44 rows
    const auto at = t.out.find("\n8,6,III,");
    ASSERT_NE(at, std::string::npos);
    EXPECT_NEAR(std::stod(t.out.substr(at + 9, 12)), 0.26405, 5e-6);
    EXPECT_EQ(cli("binomial nonexistence --j 2 --k 4").out.rfind("lhs=1.77777", 0), 0u);
}

TEST(Cli, FiniteOutputs) {
    const auto st = cli("finite stationary --scenario paper-0.4-0.6 --j 3 --k 4");
    ASSERT_EQ(st.code, 0);
    const auto w = csv::parse_table(st.out);
    ASSERT_EQ(w.size(), 1u);
    ASSERT_EQ(w[0].size(), 4u);
    for (double v : w[0]) EXPECT_NEAR(v, 0.25, 1e-12);

    const auto k = cli("finite kernel --scenario paper-R2");
    ASSERT_EQ(k.code, 0);
    const auto km = csv::parse_table(k.out);
    ASSERT_EQ(km.size(), 4u);
    const double e[4][4] = {{11.0 / 36, 1.0 / 4, 1.0 / 9, 1.0 / 3},
                            {1.0 / 4, 11.0 / 36, 1.0 / 3, 1.0 / 9},
                            {1.0 / 36, 7.0 / 36, 5.0 / 9, 2.0 / 9},
                            {7.0 / 36, 1.0 / 36, 2.0 / 9, 5.0 / 9}};
    for (std::size_t i = 0; i < 4; ++i) {
        ASSERT_EQ(km[i].size(), 4u);
        for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(km[i][t], e[i][t], 1e-12);
    }

    const auto fp = cli("finite fixed-points --scenario paper-5pt --j 1 --k 2");
    ASSERT_EQ(fp.code, 0);
    const auto doc = nlohmann::json::parse(fp.out);
    bool found = false;
    const std::vector<double> target = {0.149, 0.188, 0.203, 0.298, 0.162};
    for (const auto& r : doc["fixed_points"]) {
        const auto th = r["theta_star"].get<std::vector<double>>();
        bool close = th.size() == 5;
        for (std::size_t i = 0; close && i < 5; ++i) close = std::abs(th[i] - target[i]) < 1e-3;
        found = found || close;
    }
    EXPECT_TRUE(found);

    const auto btl = cli("finite btl-scan --leaves 4 --trials 5 --k 2");
    ASSERT_EQ(btl.code, 0);
    EXPECT_NE(btl.out.find("non_omnipresent_full_support=0"), std::string::npos);
}

TEST(Cli, McRunAndClassify) {
    TempDir tmp("cli_mc");
    const auto dir = tmp.path / "run";
    const auto r = cli("mc run --scenario interval_u_k2_j2 --particles 2000 --iterations 3 --quiet --output-dir " + dir.string());
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("run=" + dir.string() + " classification=", 0), 0u);
    const auto sum = slurp(dir / "summaries.csv");
    EXPECT_EQ(std::count(sum.begin(), sum.end(), '\n'), 5);  // header + generations 0..3
    const auto c = cli("mc classify " + dir.string());
    EXPECT_EQ(c.code, 0);
    EXPECT_EQ(c.out, r.out);
    EXPECT_EQ(cli("mc run --config " + (tmp.path / "missing.json").string()).code, 4);
}

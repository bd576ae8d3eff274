#pragma once

#include <chrono>
#include <cerrno>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "jkmap/diagnostics.hpp"
#include "jkmap/exact_finite.hpp"
#include "jkmap/io.hpp"
#include "jkmap/mc_engine.hpp"
#include "jkmap/population.hpp"
#include "jkmap/scenario.hpp"

namespace jkmap {

namespace fs = std::filesystem;

inline constexpr const char* output_root_env = "JKMAP_OUTPUT_ROOT";

inline fs::path default_output_root() {
    const char* env = std::getenv(output_root_env);
    return env && *env ? fs::path(env) : fs::path("runs");
}

struct RunOptions {
    std::optional<fs::path> output_root;
    std::size_t threads = default_threads();
    std::ostream* log = nullptr;
    std::optional<std::size_t> stop_after;  // stop once this generation is written (resume testing)
};

struct RunArtifact {
    ScenarioConfig config;
    fs::path dir;
    std::vector<IterateSummary> summaries;  // generations 0..completed
    std::optional<LimitClassification> classification;
    std::vector<std::string> warnings;
    double seconds = 0.0;
    std::size_t completed = 0;
};

inline fs::path run_directory(const ScenarioConfig& c, const std::optional<fs::path>& root = std::nullopt) {
    if (!c.output_dir.empty()) return c.output_dir;
    return root.value_or(default_output_root()) / c.name;
}

// Exclusive ownership of a run directory via run.lock holding the owner pid.
// A lock whose pid no longer exists is treated as stale and replaced.
class RunLock {
public:
    explicit RunLock(const fs::path& dir) : path_(dir / "run.lock") {
        for (int attempt = 0; attempt < 2; ++attempt) {
            const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
            if (fd >= 0) {
                const auto pid = std::to_string(::getpid()) + "\n";
                const auto w = ::write(fd, pid.data(), pid.size());
                ::close(fd);
                if (w != static_cast<ssize_t>(pid.size())) throw IoError("cannot write " + path_.string());
                return;
            }
            if (errno != EEXIST) throw IoError("cannot create " + path_.string());
            const auto holder = lock_holder(dir);
            if (holder && pid_alive(*holder))
                throw IoError("run directory " + dir.string() + " is locked by live process " + std::to_string(*holder));
            std::error_code ec;
            fs::remove(path_, ec);
        }
        throw IoError("cannot acquire " + path_.string());
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }

    static std::optional<long> lock_holder(const fs::path& dir) {
        std::ifstream in(dir / "run.lock");
        long pid = 0;
        if (in >> pid) return pid;
        return std::nullopt;
    }
    static bool pid_alive(long pid) { return pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM); }

private:
    fs::path path_;
};

namespace detail {

inline std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ';';
        out += csv::format_double(v[i]);
    }
    return out;
}

inline std::string summaries_csv(const std::vector<IterateSummary>& summaries) {
    std::string out = "generation,mean,sd,cluster_count,centers,masses,classification,chain_steps,separation\n";
    for (const auto& s : summaries) {
        std::vector<double> centers, masses;
        for (const auto& c : s.clusters) {
            centers.push_back(c.center);
            masses.push_back(c.mass);
        }
        out += std::to_string(s.generation) + ',' + join(s.mean) + ',' + csv::format_double(s.sd) + ',' +
               std::to_string(s.clusters.size()) + ',' + join(centers) + ',' + join(masses) + ',' + to_string(kind_of(s)) + ',' +
               std::to_string(s.chain_steps) + ',' + (s.separation ? csv::format_double(*s.separation) : std::string()) + '\n';
    }
    return out;
}

inline std::string coord_header(const Space& space, bool with_projection = true) {
    std::string h;
    const auto d = space.point_dimension();
    if (space.is_finite()) h = "index";
    else if (d == 1) h = "x";
    else
        for (std::size_t c = 0; c < d; ++c) h += (c ? ",x" : "x") + std::to_string(c + 1);
    if (with_projection) h += ",projection";
    return h + '\n';
}

inline std::string population_csv(const ParticlePopulation& pop, const std::vector<std::size_t>* rows, bool with_projection) {
    std::string out = coord_header(pop.space(), with_projection);
    const auto d = pop.dimension();
    auto emit = [&](std::size_t i) {
        const double* p = pop.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) {
            if (c) out += ',';
            out += csv::format_double(p[c]);
        }
        if (with_projection) {
            out += ',';
            out += csv::format_double(pop.space().projection(p));
        }
        out += '\n';
    };
    if (rows)
        for (auto i : *rows) emit(i);
    else
        for (std::size_t i = 0; i < pop.size(); ++i) emit(i);
    return out;
}

// Uniform subsample of `cap` rows (sorted), stream (seed, thinning, generation).
inline std::vector<std::size_t> thinning_rows(std::size_t n, std::size_t cap, std::uint64_t seed, std::uint64_t generation) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (cap >= n) return idx;
    Xoshiro256 rng(derive_seed(seed, stream::thinning, generation));
    for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline std::string weights_csv(const Distribution& theta, const Space& space) {
    std::string out = "index,weight,projection\n";
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double x = static_cast<double>(i);
        out += std::to_string(i) + ',' + csv::format_double(theta[i]) + ',' + csv::format_double(space.projection(&x)) + '\n';
    }
    return out;
}

inline fs::path iter_dir(const fs::path& run, std::uint64_t n) { return run / ("iter_" + std::to_string(n)); }

struct RunState {
    std::optional<ParticlePopulation> pop;
    std::optional<Distribution> theta;
};

inline void write_state(const fs::path& dir, const RunState& st) {
    fs::create_directories(dir / "state");
    if (st.pop) csv::write_file(dir / "state" / "population.csv", population_csv(*st.pop, nullptr, false));
    if (st.theta) csv::write_file(dir / "state" / "weights.csv", csv::format_matrix(st.theta->row_vector(), 1, st.theta->size()));
}

inline json run_metadata(const RunArtifact& a, const std::vector<double>& per_iter) {
    json warnings = a.warnings;
    return {{"name", a.config.name},
            {"engine", a.config.engine == Engine::exact ? "exact" : "mc"},
            {"method", a.config.engine == Engine::exact ? "exact kernel + stationary solve per iterate"
                                                        : "frozen-source T-step particle chain per iterate"},
            {"completed_iterations", a.completed},
            {"target_iterations", a.config.iterations},
            {"classification", a.classification ? to_json(*a.classification) : json(nullptr)},
            {"timing", {{"total_seconds", a.seconds}, {"per_iteration_seconds", per_iter}}},
            {"warnings", warnings}};
}

inline void log_line(const RunOptions& opt, const std::string& s) {
    if (opt.log) *opt.log << s << '\n' << std::flush;
}

inline void write_iterate(const fs::path& dir, const ScenarioConfig& c, const IterateSummary& s, const RunState& st) {
    const auto it = iter_dir(dir, s.generation);
    fs::create_directories(it);
    write_json(it / "summary.json", to_json(s));
    if (st.pop) {
        if (c.sample_cap > 0) {
            const auto rows = thinning_rows(st.pop->size(), c.sample_cap, c.seed, s.generation);
            csv::write_file(it / "samples.csv", population_csv(*st.pop, &rows, true));
        }
        if (c.store_full_population) csv::write_file(it / "population.csv", population_csv(*st.pop, nullptr, true));
    }
    if (st.theta) csv::write_file(it / "weights.csv", weights_csv(*st.theta, c.space));
}

// Advances from the last generation in `a.summaries` to the configured count.
inline void advance_run(RunArtifact& a, RunState& st, std::vector<double>& per_iter, const RunOptions& opt) {
    const auto& c = a.config;
    std::optional<FiniteGeometry> geom;
    if (c.engine == Engine::exact) geom = FiniteGeometry::from_space(c.space);
    while (a.completed < c.iterations) {
        if (opt.stop_after && a.completed >= *opt.stop_after) return;
        const auto t0 = std::chrono::steady_clock::now();
        IterateSummary s;
        const auto gen = a.completed + 1;
        if (c.engine == Engine::exact) {
            st.theta = apply_pi(*geom, *st.theta, c.j, c.k);
            s = summarize(*st.theta, c.space, gen);
        } else {
            MixingReport rep;
            st.pop = estimate_pi(*st.pop, c.j, c.k, c.mixing, c.seed, &rep, opt.threads);
            s = summarize(*st.pop);
            if (rep.cap_reached)
                a.warnings.push_back("iteration " + std::to_string(gen) + ": adaptive mixing reached T_cap=" + std::to_string(rep.steps));
        }
        write_iterate(a.dir, c, s, st);
        a.summaries.push_back(std::move(s));
        a.completed = gen;
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        per_iter.push_back(dt);
        a.seconds += dt;
        if (a.summaries.size() >= 3) a.classification = classify_limit(a.summaries);
        write_state(a.dir, st);
        csv::write_file(a.dir / "summaries.csv", summaries_csv(a.summaries));
        write_json(a.dir / "run.json", run_metadata(a, per_iter));
        const auto& last = a.summaries.back();
        char buf[160];
        std::snprintf(buf, sizeof buf, "[%s] iter %zu  sd=%.6g  clusters=%zu  steps=%zu  %.2fs", c.name.c_str(), a.completed, last.sd,
                      last.clusters.size(), last.chain_steps, dt);
        log_line(opt, buf);
    }
}

}  // namespace detail

/// theta_0 = sample_initial (or the exact initial weights), then
/// theta_{n+1} = pi(theta_n); every iterate is persisted as it completes.
inline RunArtifact run_iterative(const ScenarioConfig& config, const RunOptions& opt = {}) {
    config.validate();
    RunArtifact a;
    a.config = config;
    a.dir = run_directory(config, opt.output_root);
    fs::create_directories(a.dir);
    RunLock lock(a.dir);
    for (const auto& entry : fs::directory_iterator(a.dir)) {
        const auto name = entry.path().filename().string();
        if (name.rfind("iter_", 0) == 0 || name == "state") fs::remove_all(entry.path());
    }
    write_json(a.dir / "config.json", to_json(config));

    detail::RunState st;
    IterateSummary s0;
    if (config.engine == Engine::exact) {
        st.theta = finite_initial_weights(config.initial, config.space);
        s0 = summarize(*st.theta, config.space, 0);
    } else {
        st.pop = sample_initial(config.initial, config.space, config.particles, config.seed);
        s0 = summarize(*st.pop);
    }
    detail::write_iterate(a.dir, config, s0, st);
    a.summaries.push_back(std::move(s0));
    std::vector<double> per_iter;
    detail::write_state(a.dir, st);
    csv::write_file(a.dir / "summaries.csv", detail::summaries_csv(a.summaries));
    write_json(a.dir / "run.json", detail::run_metadata(a, per_iter));
    detail::advance_run(a, st, per_iter, opt);
    return a;
}

inline std::vector<IterateSummary> read_summaries(const fs::path& dir, std::size_t completed) {
    std::vector<IterateSummary> out;
    for (std::size_t n = 0; n <= completed; ++n) out.push_back(summary_from_json(read_json(detail::iter_dir(dir, n) / "summary.json")));
    return out;
}

/// Continues an interrupted run. `iterations` may raise the target count.
inline RunArtifact resume_run(const fs::path& dir, const RunOptions& opt = {}, std::optional<std::size_t> iterations = std::nullopt) {
    if (!fs::exists(dir / "config.json")) throw IoError(dir.string() + " is not a run directory (no config.json)");
    RunLock lock(dir);
    RunArtifact a;
    a.config = scenario_from_json(read_json(dir / "config.json"));
    a.config.output_dir = dir.string();
    if (iterations) a.config.iterations = *iterations;
    a.dir = dir;
    const auto meta = read_json(dir / "run.json");
    a.completed = meta.at("completed_iterations").get<std::size_t>();
    a.warnings = meta.value("warnings", std::vector<std::string>{});
    a.seconds = meta.at("timing").at("total_seconds").get<double>();
    auto per_iter = meta.at("timing").at("per_iteration_seconds").get<std::vector<double>>();
    a.summaries = read_summaries(dir, a.completed);

    detail::RunState st;
    if (a.config.engine == Engine::exact) {
        const auto t = csv::read_table(dir / "state" / "weights.csv");
        if (t.size() != 1) throw IoError("malformed state/weights.csv");
        st.theta = Distribution::normalized(t.front());
    } else {
        const auto t = csv::read_table(dir / "state" / "population.csv");
        std::vector<double> coords;
        coords.reserve(t.size() * a.config.space.point_dimension());
        for (const auto& row : t) coords.insert(coords.end(), row.begin(), row.end());
        SeedRecord lineage;
        lineage.master = a.config.seed;
        lineage.generation = a.completed;
        st.pop = ParticlePopulation(a.config.space, std::move(coords), a.completed, lineage);
        if (st.pop->size() != a.config.particles) throw IoError("state population size does not match the config");
    }
    if (iterations) write_json(dir / "config.json", to_json(a.config));
    detail::advance_run(a, st, per_iter, opt);
    return a;
}

/// Re-runs the limit classification on a run directory and records it in run.json.
inline LimitClassification classify_run(const fs::path& dir, const LimitThresholds& th = {}) {
    auto meta = read_json(dir / "run.json");
    const auto completed = meta.at("completed_iterations").get<std::size_t>();
    const auto summaries = read_summaries(dir, completed);
    const auto c = classify_limit(summaries, th);
    meta["classification"] = to_json(c);
    write_json(dir / "run.json", meta);
    return c;
}

}  // namespace jkmap

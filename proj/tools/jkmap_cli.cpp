// jkmap: command-line front end for the (j,k) sampling map library.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "jkmap/jkmap.hpp"

namespace fs = std::filesystem;
using namespace jkmap;

namespace {

enum Exit { ok = 0, usage = 2, validation = 3, runtime = 4 };

std::string fmt(double v) { return csv::format_double(v); }

std::string row_csv(const std::vector<double>& w) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) out += ',';
        out += fmt(w[i]);
    }
    return out;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) std::cout << text;
    else csv::write_file(out_path, text);
}

// ---------------------------------------------------------------------------
// finite: input resolution
// ---------------------------------------------------------------------------

struct FiniteInput {
    std::string scenario, rank_file, distance_file, points_file, theta_file, weights;
    int j = 0, k = 0;
    std::string out;
};

struct ResolvedFinite {
    Space space;
    std::optional<Distribution> theta;
    int j = 1, k = 2;
};

void add_finite_inputs(CLI::App* cmd, FiniteInput& in, bool needs_jk = true) {
    auto* src = cmd->add_option_group("source", "where the finite space comes from");
    src->add_option("--scenario", in.scenario, "bundled scenario name");
    src->add_option("--rank", in.rank_file, "rank matrix CSV");
    src->add_option("--distances", in.distance_file, "distance matrix CSV");
    src->add_option("--points", in.points_file, "point coordinates CSV (one point per row)");
    src->require_option(1);
    cmd->add_option("--theta", in.theta_file, "weights CSV (one row or one column)");
    cmd->add_option("--weights", in.weights, "comma-separated weights");
    if (needs_jk) {
        cmd->add_option("--j", in.j, "rank of the chosen sample (default: scenario's)");
        cmd->add_option("--k", in.k, "number of samples (default: scenario's)");
    }
    cmd->add_option("--out", in.out, "write output to this file instead of stdout");
}

Distribution parse_weights(const FiniteInput& in) {
    std::vector<double> w;
    if (!in.weights.empty()) {
        for (auto f : csv::split(in.weights)) {
            double v;
            if (!csv::parse_double(f, v)) throw InvalidInput("--weights: not a number: '" + std::string(f) + "'");
            w.push_back(v);
        }
    } else {
        for (const auto& row : csv::read_table(in.theta_file)) w.insert(w.end(), row.begin(), row.end());
    }
    return Distribution(std::move(w));
}

ResolvedFinite resolve(const FiniteInput& in) {
    ResolvedFinite r;
    if (!in.scenario.empty()) {
        auto c = bundled_scenario(in.scenario);
        if (!c.space.is_finite()) throw InvalidInput("scenario '" + in.scenario + "' is not on a finite space");
        r.space = c.space;
        r.theta = finite_initial_weights(c.initial, c.space);
        r.j = c.j;
        r.k = c.k;
    } else if (!in.rank_file.empty()) {
        r.space = Space::finite_rank(rank_matrix_from_table(csv::read_table(in.rank_file)));
    } else if (!in.distance_file.empty()) {
        r.space = Space::distance_table(matrix_from_table(csv::read_table(in.distance_file)));
    } else {
        r.space = Space::point_cloud(csv::read_table(in.points_file));
    }
    if (in.j > 0) r.j = in.j;
    if (in.k > 0) r.k = in.k;
    if (!in.theta_file.empty() || !in.weights.empty()) r.theta = parse_weights(in);
    check_order(r.j, r.k);
    if (r.theta && r.theta->size() != r.space.finite_size())
        throw InvalidInput("weights have " + std::to_string(r.theta->size()) + " entries, space has " +
                           std::to_string(r.space.finite_size()));
    return r;
}

Distribution require_theta(const ResolvedFinite& r) {
    if (!r.theta) throw InvalidInput("this command needs weights (--theta, --weights or a scenario)");
    return *r.theta;
}

// ---------------------------------------------------------------------------
// mc helpers
// ---------------------------------------------------------------------------

struct McOverrides {
    std::optional<std::size_t> particles, iterations, threads;
    std::optional<std::uint64_t> seed;
    std::optional<int> j, k;
    std::string output_dir;
};

ScenarioConfig apply_overrides(ScenarioConfig c, const McOverrides& o) {
    if (o.particles) c.particles = *o.particles;
    if (o.iterations) c.iterations = *o.iterations;
    if (o.seed) {
        c.seed = *o.seed;
        if (auto* d = std::get_if<initial::DirichletRandom>(&c.initial)) d->seed = *o.seed;
    }
    if (o.j) c.j = *o.j;
    if (o.k) c.k = *o.k;
    if (!o.output_dir.empty()) c.output_dir = o.output_dir;
    c.validate();
    return c;
}

void print_classification(const fs::path& dir, const LimitClassification& c) {
    std::printf("run=%s classification=%s", dir.string().c_str(), to_string(c.kind));
    if (c.kind != LimitKind::undecided) {
        std::printf(" locations=%s masses=%s", row_csv(c.locations).c_str(), row_csv(c.masses).c_str());
        if (c.masses_equalizing) std::printf(" masses_equalizing=%s", *c.masses_equalizing ? "true" : "false");
    }
    std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"jkmap: iterate the j-th-of-k nearest sample map on finite and continuous spaces"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "jkmap 1.0");

    // binomial ---------------------------------------------------------------
    auto* bin = app.add_subcommand("binomial", "two-point space map p -> pi_{j,k}(p)");
    bin->require_subcommand(1);
    int kmax = 9, bj = 0, bk = 0;
    double bp = 0.0;
    auto* b_table = bin->add_subcommand("table", "classify every (j,k) with k <= kmax (CSV)");
    b_table->add_option("--kmax", kmax)->check(CLI::Range(2, 12));
    auto* b_classify = bin->add_subcommand("classify", "behavior type and p_crit");
    b_classify->add_option("--j", bj)->required();
    b_classify->add_option("--k", bk)->required();
    auto* b_map = bin->add_subcommand("map", "evaluate the map at p");
    b_map->add_option("--p", bp)->required();
    b_map->add_option("--j", bj)->required();
    b_map->add_option("--k", bk)->required();
    auto* b_nonex = bin->add_subcommand("nonexistence", "density non-existence inequality on [0,1]");
    b_nonex->add_option("--j", bj)->required();
    b_nonex->add_option("--k", bk)->required();

    // finite -----------------------------------------------------------------
    auto* fin = app.add_subcommand("finite", "exact computations on finite spaces");
    fin->require_subcommand(1);
    FiniteInput fk, fs_, fit, ffp;
    auto* f_kernel = fin->add_subcommand("kernel", "transition matrix K(theta) as CSV");
    add_finite_inputs(f_kernel, fk);
    auto* f_stat = fin->add_subcommand("stationary", "pi_{j,k}(theta) as one CSV row");
    add_finite_inputs(f_stat, fs_);
    auto* f_iter = fin->add_subcommand("iterate", "theta_0 .. theta_n, one CSV row each");
    add_finite_inputs(f_iter, fit);
    std::size_t iter_steps = 10;
    f_iter->add_option("--steps", iter_steps, "number of applications of the map");
    auto* f_fp = fin->add_subcommand("fixed-points", "fixed-point search with stability tags (JSON)");
    add_finite_inputs(f_fp, ffp);
    FixedPointSearchOptions fp_opt;
    f_fp->add_option("--restarts", fp_opt.n_restarts, "random full-simplex starts");
    f_fp->add_option("--seed", fp_opt.seed);
    f_fp->add_option("--tol", fp_opt.tol);
    std::string feas_rank, feas_out;
    double feas_margin = 1e-3;
    std::uint64_t feas_seed = 1;
    auto* f_feas = fin->add_subcommand("feasibility", "search for a distance matrix realizing a rank matrix");
    f_feas->add_option("--rank", feas_rank, "rank matrix CSV")->required();
    f_feas->add_option("--margin", feas_margin);
    f_feas->add_option("--seed", feas_seed);
    f_feas->add_option("--out", feas_out, "write the distance matrix here");
    std::size_t btl_leaves = 4, btl_trials = 50;
    int btl_k = 2, btl_j = 1;
    std::uint64_t btl_seed = 1;
    std::size_t btl_restarts = 64;
    auto* f_btl = fin->add_subcommand("btl-scan", "fixed points on random binary-tree-leaf spaces");
    f_btl->add_option("--leaves", btl_leaves)->check(CLI::Range(3, 12));
    f_btl->add_option("--trials", btl_trials);
    f_btl->add_option("--k", btl_k);
    f_btl->add_option("--j", btl_j);
    f_btl->add_option("--seed", btl_seed);
    f_btl->add_option("--restarts", btl_restarts);

    // mc ---------------------------------------------------------------------
    auto* mc = app.add_subcommand("mc", "iterative runs (Monte Carlo or exact engine)");
    mc->require_subcommand(1);
    std::string cfg_file, cfg_name;
    McOverrides ov;
    bool quiet = false;
    auto* m_run = mc->add_subcommand("run", "run a scenario into a run directory");
    auto* cfg = m_run->add_option_group("config");
    cfg->add_option("--config", cfg_file, "scenario JSON file");
    cfg->add_option("--scenario", cfg_name, "bundled scenario name");
    cfg->require_option(1);
    m_run->add_option("--particles", ov.particles);
    m_run->add_option("--iterations", ov.iterations);
    m_run->add_option("--seed", ov.seed);
    m_run->add_option("--j", ov.j);
    m_run->add_option("--k", ov.k);
    m_run->add_option("--output-dir", ov.output_dir, "run directory (default: $JKMAP_OUTPUT_ROOT/<name>)");
    m_run->add_option("--threads", ov.threads);
    m_run->add_flag("--quiet", quiet);
    std::string resume_dir;
    std::optional<std::size_t> resume_iters, resume_threads;
    auto* m_resume = mc->add_subcommand("resume", "continue an interrupted run");
    m_resume->add_option("run_dir", resume_dir)->required();
    m_resume->add_option("--iterations", resume_iters, "raise the target iteration count");
    m_resume->add_option("--threads", resume_threads);
    m_resume->add_flag("--quiet", quiet);
    std::string classify_dir;
    auto* m_classify = mc->add_subcommand("classify", "re-run the limit classification on a run directory");
    m_classify->add_option("run_dir", classify_dir)->required();

    // scenario ---------------------------------------------------------------
    auto* sc = app.add_subcommand("scenario", "bundled scenarios");
    sc->require_subcommand(1);
    auto* s_list = sc->add_subcommand("list", "names of bundled scenarios");
    std::string show_name, write_dir;
    auto* s_show = sc->add_subcommand("show", "print a bundled scenario as JSON");
    s_show->add_option("name", show_name)->required();
    auto* s_write = sc->add_subcommand("write", "write every bundled scenario as <name>.json");
    s_write->add_option("--dir", write_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::usage;
    }

    try {
        // binomial
        if (b_table->parsed()) {
            std::cout << "k,j,type,p_crit\n";
            for (const auto& c : binomial::classification_table(kmax)) {
                std::cout << c.k << ',' << c.j << ',' << binomial::to_string(c.type) << ',';
                if (c.p_crit) std::printf("%.8f", *c.p_crit);
                std::cout << std::flush << '\n';
            }
        } else if (b_classify->parsed()) {
            const auto c = binomial::classify(bj, bk);
            std::printf("type=%s", binomial::to_string(c.type));
            if (c.p_crit) std::printf(" p_crit=%.5f", *c.p_crit);
            std::printf("\n");
        } else if (b_map->parsed()) {
            if (!(bp >= 0.0 && bp <= 1.0)) throw InvalidInput("--p must lie in [0,1]");
            std::printf("%.12g\n", binomial::map(bp, bj, bk));
        } else if (b_nonex->parsed()) {
            check_order(bj, bk);
            const bool holds = binomial::density_nonexistence_check(bj, bk);
            if (bj == bk) std::printf("lhs=NA nonexistence=true\n");
            else std::printf("lhs=%.10g nonexistence=%s\n", binomial::nonexistence_lhs(bj, bk), holds ? "true" : "false");
        }
        // finite
        else if (f_kernel->parsed()) {
            const auto r = resolve(fk);
            const auto g = FiniteGeometry::from_space(r.space);
            emit(matrix_csv(g.kernel(require_theta(r), r.j, r.k).matrix()), fk.out);
        } else if (f_stat->parsed()) {
            const auto r = resolve(fs_);
            emit(row_csv(apply_pi(FiniteGeometry::from_space(r.space), require_theta(r), r.j, r.k).weights()) + "\n", fs_.out);
        } else if (f_iter->parsed()) {
            const auto r = resolve(fit);
            std::string out;
            for (const auto& t : iterate_exact(FiniteGeometry::from_space(r.space), require_theta(r), r.j, r.k, iter_steps))
                out += row_csv(t.weights()) + "\n";
            emit(out, fit.out);
        } else if (f_fp->parsed()) {
            const auto r = resolve(ffp);
            const auto g = FiniteGeometry::from_space(r.space);
            const auto reports = find_fixed_points(g, r.j, r.k, fp_opt);
            const auto* pc = std::get_if<PointCloud>(&r.space.variant());
            std::optional<Eigen::MatrixXd> dist;
            if (pc) dist = r.space.distance_matrix();
            emit(fixed_point_document(reports, g.ranks(), dist ? &*dist : nullptr, r.j, r.k, fp_opt).dump(2) + "\n", ffp.out);
        } else if (f_feas->parsed()) {
            const auto rm = rank_matrix_from_table(csv::read_table(feas_rank));
            const auto d = feasibility_search(rm, feas_margin, feas_seed);
            if (!d) {
                std::printf("feasibility=not_found margin=%g symmetric=%s\n", feas_margin, rm.is_symmetric() ? "true" : "false");
            } else {
                std::printf("feasibility=found margin=%g symmetric=%s\n", feas_margin, rm.is_symmetric() ? "true" : "false");
                if (feas_out.empty()) std::cout << matrix_csv(*d);
                else csv::write_file(feas_out, matrix_csv(*d));
            }
        } else if (f_btl->parsed()) {
            check_order(btl_j, btl_k);
            std::size_t flagged = 0;
            std::cout << "trial,fixed_points,full_support_non_omnipresent\n";
            for (std::size_t t = 0; t < btl_trials; ++t) {
                const auto d = random_btl_space(btl_leaves, derive_seed(btl_seed, stream::restarts, btl_leaves, t));
                FixedPointSearchOptions o;
                o.n_restarts = btl_restarts;
                o.seed = derive_seed(btl_seed, stream::restarts, 0, t);
                const auto reports = find_fixed_points(FiniteGeometry::from_distances(d), btl_j, btl_k, o);
                std::size_t bad = 0;
                for (const auto& rep : reports)
                    if (!rep.omnipresent && rep.support_size == btl_leaves) ++bad;
                flagged += bad;
                std::cout << t << ',' << reports.size() << ',' << bad << '\n';
            }
            std::printf("leaves=%zu trials=%zu j=%d k=%d non_omnipresent_full_support=%zu\n", btl_leaves, btl_trials, btl_j, btl_k, flagged);
        }
        // mc
        else if (m_run->parsed()) {
            ScenarioConfig c = cfg_file.empty() ? bundled_scenario(cfg_name) : scenario_from_json(read_json(cfg_file));
            c = apply_overrides(std::move(c), ov);
            RunOptions opt;
            if (ov.threads) opt.threads = *ov.threads;
            if (!quiet) opt.log = &std::cerr;
            const auto a = run_iterative(c, opt);
            if (a.classification) print_classification(a.dir, *a.classification);
            else std::printf("run=%s classification=none (fewer than 3 iterates)\n", a.dir.string().c_str());
            for (const auto& w : a.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        } else if (m_resume->parsed()) {
            RunOptions opt;
            if (resume_threads) opt.threads = *resume_threads;
            if (!quiet) opt.log = &std::cerr;
            const auto a = resume_run(resume_dir, opt, resume_iters);
            if (a.classification) print_classification(a.dir, *a.classification);
        } else if (m_classify->parsed()) {
            print_classification(classify_dir, classify_run(classify_dir));
        }
        // scenario
        else if (s_list->parsed()) {
            for (const auto& c : bundled_scenarios())
                std::printf("%s\t%s\t%s\tj=%d k=%d\n", c.name.c_str(), c.engine == Engine::exact ? "exact" : "mc",
                            c.space.name().c_str(), c.j, c.k);
        } else if (s_show->parsed()) {
            std::cout << to_json(bundled_scenario(show_name)).dump(2) << '\n';
        } else if (s_write->parsed()) {
            fs::create_directories(write_dir);
            for (const auto& c : bundled_scenarios()) write_json(fs::path(write_dir) / (c.name + ".json"), to_json(c));
            std::printf("wrote %zu scenarios to %s\n", bundled_scenarios().size(), write_dir.c_str());
        }
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::validation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return Exit::runtime;
    }
    return Exit::ok;
}

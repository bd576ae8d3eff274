#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jkmap/error.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/mc_engine.hpp"
#include "jkmap/population.hpp"
#include "jkmap/spaces.hpp"

namespace jkmap {

enum class Engine { exact, mc };

struct ScenarioConfig {
    std::string name;
    Space space;
    InitialDistributionSpec initial;
    int j = 1;
    int k = 2;
    Engine engine = Engine::mc;
    std::size_t particles = 200000;
    std::size_t iterations = 10;
    MixingPolicy mixing;
    std::uint64_t seed = 1;
    std::string output_dir;  // empty: <output root>/<name>
    std::size_t sample_cap = 50000;
    bool store_full_population = false;

    void validate() const {
        if (name.empty()) throw InvalidInput("scenario: name is empty");
        if (k < 2) throw InvalidInput("scenario: k must be >= 2");
        if (j < 1 || j > k) throw InvalidInput("scenario: j must satisfy 1 <= j <= k");
        if (k > 64) throw InvalidInput("scenario: k must be <= 64");
        if (engine == Engine::exact && !space.is_finite()) throw InvalidInput("scenario: the exact engine needs a finite space");
        if (engine == Engine::mc && particles < 2) throw InvalidInput("scenario: particles must be >= 2");
        if (iterations < 1) throw InvalidInput("scenario: iterations must be >= 1");
        mixing.validate();
        if (engine == Engine::exact) (void)finite_initial_weights(initial, space);
        else if (!detail::spec_fits(initial, space))
            throw InvalidInput("scenario: initial '" + initial_name(initial) + "' does not fit space '" + space.name() + "'");
    }
};

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty()) throw InvalidInput(std::string(what) + ": expected a nonempty array of rows");
    const auto n = j.size();
    const auto m = j.front().size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    for (std::size_t r = 0; r < n; ++r) {
        if (!j[r].is_array() || j[r].size() != m) throw InvalidInput(std::string(what) + ": ragged rows");
        for (std::size_t c = 0; c < m; ++c) {
            if (!j[r][c].is_number()) throw InvalidInput(std::string(what) + ": non-numeric entry");
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return out;
}

template <class T>
inline T get_field(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) throw InvalidInput(std::string(where) + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidInput(std::string(where) + ": field '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline nlohmann::json space_to_json(const Space& s) {
    using nlohmann::json;
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Interval>) return {{"type", "interval"}};
            else if constexpr (std::is_same_v<T, Circle>) return {{"type", "circle"}};
            else if constexpr (std::is_same_v<T, HypercubeWeighted>)
                return {{"type", "hypercube"}, {"dimension", v.dimension}, {"beta", v.beta}};
            else if constexpr (std::is_same_v<T, PointCloud>) {
                if (v.table) return {{"type", "distance_table"}, {"distances", detail::matrix_to_json(*v.table)}};
                return {{"type", "point_cloud"}, {"points", v.points}};
            } else {
                return {{"type", "rank_matrix"}, {"ranks", v.ranks.rows()}};
            }
        },
        s.variant());
}

inline Space space_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidInput("space: expected an object");
    const auto type = detail::get_field<std::string>(j, "type", "space");
    if (type == "interval") return Space::interval();
    if (type == "circle") return Space::circle();
    if (type == "hypercube")
        return Space::hypercube(detail::get_field<int>(j, "dimension", "space"), detail::get_field<double>(j, "beta", "space"));
    if (type == "point_cloud")
        return Space::point_cloud(detail::get_field<std::vector<std::vector<double>>>(j, "points", "space"));
    if (type == "distance_table") {
        if (!j.contains("distances")) throw InvalidInput("space: missing field 'distances'");
        return Space::distance_table(detail::matrix_from_json(j["distances"], "space.distances"));
    }
    if (type == "rank_matrix")
        return Space::finite_rank(RankMatrix::from_rows(detail::get_field<std::vector<std::vector<int>>>(j, "ranks", "space")));
    throw InvalidInput("space: unknown type '" + type + "'");
}

inline nlohmann::json initial_to_json(const InitialDistributionSpec& spec) {
    using nlohmann::json;
    json out = {{"type", initial_name(spec)}};
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, initial::GaussianCube>) out["alpha"] = s.alpha;
            else if constexpr (std::is_same_v<T, initial::FiniteWeights>) out["weights"] = s.weights.weights();
            else if constexpr (std::is_same_v<T, initial::PointMass>) out["location"] = s.location;
            else if constexpr (std::is_same_v<T, initial::TwoPointMass>) {
                out["loc1"] = s.loc1;
                out["loc2"] = s.loc2;
            } else if constexpr (std::is_same_v<T, initial::DirichletRandom>) out["seed"] = s.seed;
        },
        spec);
    return out;
}

// A dirichlet_random spec without a seed takes `default_seed`.
inline InitialDistributionSpec initial_from_json(const nlohmann::json& j, std::uint64_t default_seed = 1) {
    if (!j.is_object()) throw InvalidInput("initial: expected an object");
    const auto type = detail::get_field<std::string>(j, "type", "initial");
    if (type == "uniform_interval") return initial::UniformInterval{};
    if (type == "tilted") return initial::Tilted{};
    if (type == "more_tilted") return initial::MoreTilted{};
    if (type == "uniform_circle") return initial::UniformCircle{};
    if (type == "circle_disc") return initial::CircleDisc{};
    if (type == "gaussian_cube") {
        const auto a = detail::get_field<double>(j, "alpha", "initial");
        if (!(a > 0.0)) throw InvalidInput("initial: alpha must be positive");
        return initial::GaussianCube{a};
    }
    if (type == "finite_weights")
        return initial::FiniteWeights{Distribution(detail::get_field<std::vector<double>>(j, "weights", "initial"))};
    if (type == "point_mass") return initial::PointMass{detail::get_field<std::vector<double>>(j, "location", "initial")};
    if (type == "two_point_mass")
        return initial::TwoPointMass{detail::get_field<std::vector<double>>(j, "loc1", "initial"),
                                     detail::get_field<std::vector<double>>(j, "loc2", "initial")};
    if (type == "dirichlet_random")
        return initial::DirichletRandom{j.contains("seed") ? detail::get_field<std::uint64_t>(j, "seed", "initial") : default_seed};
    throw InvalidInput("initial: unknown type '" + type + "'");
}

inline nlohmann::json mixing_to_json(const MixingPolicy& p) {
    nlohmann::json out = {{"mode", to_string(p.mode)}};
    switch (p.mode) {
        case MixingMode::bound: out["epsilon"] = p.epsilon; break;
        case MixingMode::adaptive:
            out["w1_tol"] = p.w1_tol;
            out["check_stride"] = p.check_stride;
            out["noise_floor"] = p.noise_floor;
            break;
        case MixingMode::fixed: out["steps"] = p.fixed_steps; break;
    }
    out["t_cap"] = p.t_cap ? nlohmann::json(*p.t_cap) : nlohmann::json(nullptr);
    return out;
}

inline MixingPolicy mixing_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidInput("mixing: expected an object");
    MixingPolicy p;
    const auto mode = detail::get_field<std::string>(j, "mode", "mixing");
    if (mode == "bound") {
        p.mode = MixingMode::bound;
        if (j.contains("epsilon")) p.epsilon = detail::get_field<double>(j, "epsilon", "mixing");
    } else if (mode == "adaptive") {
        p.mode = MixingMode::adaptive;
        if (j.contains("w1_tol")) p.w1_tol = detail::get_field<double>(j, "w1_tol", "mixing");
        if (j.contains("check_stride")) p.check_stride = detail::get_field<std::size_t>(j, "check_stride", "mixing");
        if (j.contains("noise_floor")) p.noise_floor = detail::get_field<bool>(j, "noise_floor", "mixing");
    } else if (mode == "fixed") {
        p.mode = MixingMode::fixed;
        p.fixed_steps = detail::get_field<std::size_t>(j, "steps", "mixing");
    } else {
        throw InvalidInput("mixing: unknown mode '" + mode + "'");
    }
    if (j.contains("t_cap") && !j["t_cap"].is_null()) p.t_cap = detail::get_field<std::size_t>(j, "t_cap", "mixing");
    p.validate();
    return p;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
    return {{"name", c.name},
            {"space", space_to_json(c.space)},
            {"initial", initial_to_json(c.initial)},
            {"j", c.j},
            {"k", c.k},
            {"engine", c.engine == Engine::exact ? "exact" : "mc"},
            {"particles", c.particles},
            {"iterations", c.iterations},
            {"mixing", mixing_to_json(c.mixing)},
            {"seed", c.seed},
            {"output_dir", c.output_dir},
            {"sample_cap", c.sample_cap},
            {"store_full_population", c.store_full_population}};
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    using detail::get_field;
    if (!j.is_object()) throw InvalidInput("scenario: expected a JSON object");
    static const std::vector<std::string> known = {"name",       "space", "initial", "j",          "k",          "engine",
                                                   "particles",  "iterations", "mixing", "seed", "output_dir", "sample_cap",
                                                   "store_full_population"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw InvalidInput("scenario: unknown field '" + it.key() + "'");
    ScenarioConfig c;
    c.name = get_field<std::string>(j, "name", "scenario");
    c.seed = j.contains("seed") ? get_field<std::uint64_t>(j, "seed", "scenario") : 1;
    if (!j.contains("space")) throw InvalidInput("scenario: missing field 'space'");
    c.space = space_from_json(j["space"]);
    if (!j.contains("initial")) throw InvalidInput("scenario: missing field 'initial'");
    c.initial = initial_from_json(j["initial"], c.seed);
    c.j = get_field<int>(j, "j", "scenario");
    c.k = get_field<int>(j, "k", "scenario");
    if (j.contains("engine")) {
        const auto e = get_field<std::string>(j, "engine", "scenario");
        if (e == "exact") c.engine = Engine::exact;
        else if (e == "mc") c.engine = Engine::mc;
        else throw InvalidInput("scenario: engine must be 'exact' or 'mc'");
    }
    if (j.contains("particles")) c.particles = get_field<std::size_t>(j, "particles", "scenario");
    if (j.contains("iterations")) c.iterations = get_field<std::size_t>(j, "iterations", "scenario");
    if (j.contains("mixing")) c.mixing = mixing_from_json(j["mixing"]);
    if (j.contains("output_dir")) c.output_dir = get_field<std::string>(j, "output_dir", "scenario");
    if (j.contains("sample_cap")) c.sample_cap = get_field<std::size_t>(j, "sample_cap", "scenario");
    if (j.contains("store_full_population")) c.store_full_population = get_field<bool>(j, "store_full_population", "scenario");
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Bundled scenarios
// ---------------------------------------------------------------------------

inline Eigen::MatrixXd five_point_distances() {
    Eigen::MatrixXd d(5, 5);
    d << 0, 1.714, 1.341, 1.656, 1.74,
         1.714, 0, 1.298, 1.794, 1.03,
         1.341, 1.298, 0, 1.715, 1.844,
         1.656, 1.794, 1.715, 0, 1.524,
         1.74, 1.03, 1.844, 1.524, 0;
    return d;
}

inline RankMatrix r2_ranks() { return RankMatrix::from_rows({{1, 2, 4, 3}, {2, 1, 3, 4}, {4, 2, 1, 3}, {2, 4, 3, 1}}); }

inline std::vector<std::vector<double>> ninepoint_coordinates() {
    return {{1.3843, 1.2619}, {1.108, 2.4567},  {1.1358, 3.4418}, {2.2758, 3.27},  {3.022, 1.162},
            {3.3549, 2.477},  {2.4671, 2.1929}, {2.3478, 1.3067}, {3.2165, 3.0299}};
}

inline std::vector<ScenarioConfig> bundled_scenarios() {
    std::vector<ScenarioConfig> out;
    auto exact = [&](std::string name, Space space, InitialDistributionSpec init, int j, int k, std::size_t iters) {
        ScenarioConfig c;
        c.name = std::move(name);
        c.space = std::move(space);
        c.initial = std::move(init);
        c.j = j;
        c.k = k;
        c.engine = Engine::exact;
        c.iterations = iters;
        out.push_back(std::move(c));
    };
    auto mc = [&](std::string name, Space space, InitialDistributionSpec init, int j, int k, std::size_t iters) {
        ScenarioConfig c;
        c.name = std::move(name);
        c.space = std::move(space);
        c.initial = std::move(init);
        c.j = j;
        c.k = k;
        c.iterations = iters;
        out.push_back(std::move(c));
    };

    exact("paper-5pt", Space::distance_table(five_point_distances()), initial::DirichletRandom{1}, 1, 2, 50);
    exact("paper-R2", Space::finite_rank(r2_ranks()), initial::FiniteWeights{Distribution({1.0 / 6, 1.0 / 6, 2.0 / 6, 2.0 / 6})}, 1,
          2, 20);
    exact("paper-0.4-0.6", Space::point_cloud({{0.0}, {0.4}, {0.6}, {1.0}}), initial::FiniteWeights{Distribution::uniform(4)}, 3,
          4, 20);
    exact("ninepoint_k10", Space::point_cloud(ninepoint_coordinates()), initial::DirichletRandom{1}, 1, 10, 300);

    for (int k = 2; k <= 6; ++k)
        for (int j = 1; j <= k; ++j)
            mc("interval_u_k" + std::to_string(k) + "_j" + std::to_string(j), Space::interval(), initial::UniformInterval{}, j, k, 12);
    mc("interval_tilted", Space::interval(), initial::Tilted{}, 4, 4, 12);
    mc("interval_more_tilted", Space::interval(), initial::MoreTilted{}, 4, 4, 12);
    mc("circle_uniform_k4", Space::circle(), initial::UniformCircle{}, 2, 4, 20);
    mc("circle_disc_k4", Space::circle(), initial::CircleDisc{}, 2, 4, 20);
    for (double alpha : {0.1, 1.0})
        for (double beta : {0.7, 0.9})
            for (int j : {1, 2}) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "tencube_a%g_b%g_j%d", alpha, beta, j);
                mc(buf, Space::hypercube(10, beta), initial::GaussianCube{alpha}, j, 2, 10);
            }
    for (auto& c : out) c.validate();
    return out;
}

inline ScenarioConfig bundled_scenario(const std::string& name) {
    for (auto& c : bundled_scenarios())
        if (c.name == name) return c;
    throw InvalidInput("unknown bundled scenario '" + name + "'");
}

}  // namespace jkmap

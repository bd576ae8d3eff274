#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jkmap/csv.hpp"
#include "jkmap/diagnostics.hpp"
#include "jkmap/error.hpp"
#include "jkmap/exact_finite.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/scenario.hpp"

namespace jkmap {

using nlohmann::json;

inline json to_json(const Cluster& c) {
    return {{"center", c.center}, {"mass", c.mass}, {"sd", c.sd}, {"count", c.count}};
}

inline json to_json(const IterateSummary& s) {
    json clusters = json::array();
    for (const auto& c : s.clusters) clusters.push_back(to_json(c));
    json q = json::object();
    for (std::size_t i = 0; i < summary_quantile_levels.size(); ++i) {
        char key[16];
        std::snprintf(key, sizeof key, "q%02d", static_cast<int>(std::lround(summary_quantile_levels[i] * 100)));
        q[key] = s.quantiles[i];
    }
    return {{"generation", s.generation},
            {"mean", s.mean},
            {"projection_mean", s.projection_mean},
            {"sd", s.sd},
            {"quantiles", q},
            {"clusters", clusters},
            {"separation", s.separation ? json(*s.separation) : json(nullptr)},
            {"limit_kind", to_string(kind_of(s))},
            {"chain_steps", s.chain_steps},
            {"flags", s.flags}};
}

inline IterateSummary summary_from_json(const json& j) {
    try {
        IterateSummary s;
        s.generation = j.at("generation").get<std::uint64_t>();
        s.mean = j.at("mean").get<std::vector<double>>();
        s.projection_mean = j.at("projection_mean").get<double>();
        s.sd = j.at("sd").get<double>();
        const auto& q = j.at("quantiles");
        for (std::size_t i = 0; i < summary_quantile_levels.size(); ++i) {
            char key[16];
            std::snprintf(key, sizeof key, "q%02d", static_cast<int>(std::lround(summary_quantile_levels[i] * 100)));
            s.quantiles[i] = q.at(key).get<double>();
        }
        for (const auto& c : j.at("clusters"))
            s.clusters.push_back({c.at("center").get<double>(), c.at("mass").get<double>(), c.at("sd").get<double>(),
                                  c.at("count").get<std::size_t>()});
        if (!j.at("separation").is_null()) s.separation = j.at("separation").get<double>();
        s.chain_steps = j.value("chain_steps", std::size_t{0});
        s.flags = j.value("flags", std::vector<std::string>{});
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed summary: ") + e.what());
    }
}

inline json to_json(const LimitClassification& c) {
    return {{"kind", to_string(c.kind)},
            {"locations", c.locations},
            {"masses", c.masses},
            {"thresholds", {{"one_point_mass", c.thresholds.one_point_mass}, {"two_point_mass", c.thresholds.two_point_mass}}},
            {"masses_equalizing", c.masses_equalizing ? json(*c.masses_equalizing) : json(nullptr)},
            {"contracting", c.contracting}};
}

inline json to_json(const DecayFit& f) { return {{"c_fit", f.c_fit}, {"r_squared", f.r_squared}, {"burn_in", f.burn_in}}; }

// Report plus an echo of the inputs it was computed from.
inline json to_json(const FixedPointReport& r) {
    return {{"theta_star", r.theta_star.weights()},
            {"residual", r.residual},
            {"support_size", r.support_size},
            {"spectral_radius", r.spectral_radius},
            {"stability", to_string(r.stability)},
            {"omnipresent", r.omnipresent}};
}

inline json fixed_point_document(const std::vector<FixedPointReport>& reports, const RankMatrix* ranks,
                                 const Eigen::MatrixXd* distances, int j, int k, const FixedPointSearchOptions& opt) {
    json in = {{"j", j}, {"k", k}, {"n_restarts", opt.n_restarts}, {"tol", opt.tol}, {"seed", opt.seed},
               {"face_restarts", opt.face_restarts}, {"max_newton_steps", opt.max_newton_steps}};
    if (opt.search_faces) in["search_faces"] = *opt.search_faces;
    if (ranks) in["ranks"] = ranks->rows();
    if (distances) in["distances"] = detail::matrix_to_json(*distances);
    json list = json::array();
    for (const auto& r : reports) list.push_back(to_json(r));
    return {{"input", in}, {"fixed_points", list}};
}

inline std::string rank_matrix_csv(const RankMatrix& r) {
    std::string out;
    for (const auto& row : r.rows()) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += std::to_string(row[c]);
        }
        out += '\n';
    }
    return out;
}

inline std::string matrix_csv(const Eigen::MatrixXd& m) {
    return csv::format_matrix(m, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
}

inline RankMatrix rank_matrix_from_table(const std::vector<std::vector<double>>& t) {
    std::vector<std::vector<int>> rows;
    for (const auto& row : t) {
        std::vector<int> r;
        for (double v : row) {
            if (v != std::floor(v)) throw InvalidInput("rank matrix entries must be integers");
            r.push_back(static_cast<int>(v));
        }
        rows.push_back(std::move(r));
    }
    return RankMatrix::from_rows(rows);
}

inline Eigen::MatrixXd matrix_from_table(const std::vector<std::vector<double>>& t) {
    if (t.empty()) throw InvalidInput("empty matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(t.front().size()));
    for (std::size_t r = 0; r < t.size(); ++r) {
        if (t[r].size() != t.front().size()) throw InvalidInput("ragged matrix");
        for (std::size_t c = 0; c < t[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = t[r][c];
    }
    return m;
}

inline json read_json(const std::filesystem::path& p) {
    const auto text = csv::read_file(p);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(p.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& p, const json& j) { csv::write_file(p, j.dump(2) + "\n"); }

}  // namespace jkmap

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "jkmap/error.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/rng.hpp"

namespace jkmap {

// ---------------------------------------------------------------------------
// Space variants
// ---------------------------------------------------------------------------

struct Interval {};    // [0,1], |x - y|
struct Circle {};      // [0,1) with wraparound, min(|x-y|, 1-|x-y|)

// [0,1]^dimension with d(x,y) = sum_i beta^i |x_i - y_i|, i = 1..dimension.
struct HypercubeWeighted {
    int dimension = 10;
    double beta = 0.7;
};

// Finite set given by coordinates (Euclidean) or by an explicit distance table.
// Points of the space are indices 0..n-1.
struct PointCloud {
    std::vector<std::vector<double>> points;
    std::optional<Eigen::MatrixXd> table;
};

// Finite set known only through its rank matrix. Points are indices.
struct FiniteRank {
    RankMatrix ranks;
};

using SpaceVariant = std::variant<Interval, Circle, HypercubeWeighted, PointCloud, FiniteRank>;

class Space {
public:
    Space() : v_(Interval{}) {}

    static Space interval() { return Space(Interval{}); }
    static Space circle() { return Space(Circle{}); }

    static Space hypercube(int dimension, double beta) {
        if (dimension < 1) throw InvalidInput("hypercube dimension must be >= 1");
        if (!(beta > 0.0 && beta < 1.0)) throw InvalidInput("hypercube beta must lie in (0,1)");
        return Space(HypercubeWeighted{dimension, beta});
    }

    static Space point_cloud(std::vector<std::vector<double>> points) {
        if (points.empty()) throw InvalidInput("point cloud needs at least one point");
        const auto d = points.front().size();
        if (d == 0) throw InvalidInput("point cloud coordinates are empty");
        for (const auto& p : points) {
            if (p.size() != d) throw InvalidInput("point cloud coordinate dimension mismatch");
            for (double c : p)
                if (!std::isfinite(c)) throw InvalidInput("point cloud coordinate is not finite");
        }
        return Space(PointCloud{std::move(points), std::nullopt});
    }

    // Validated eagerly: symmetric, zero diagonal, positive off-diagonal.
    static Space distance_table(Eigen::MatrixXd table) {
        validate_distance_table(table);
        return Space(PointCloud{{}, std::move(table)});
    }

    static Space finite_rank(RankMatrix r) { return Space(FiniteRank{std::move(r)}); }

    static void validate_distance_table(const Eigen::MatrixXd& d) {
        if (d.rows() != d.cols() || d.rows() == 0) throw InvalidInput("distance table must be square and nonempty");
        for (Eigen::Index i = 0; i < d.rows(); ++i) {
            if (d(i, i) != 0.0) throw InvalidInput("distance table diagonal must be zero (row " + std::to_string(i) + ")");
            for (Eigen::Index t = i + 1; t < d.cols(); ++t) {
                if (!(d(i, t) > 0.0) || !std::isfinite(d(i, t)))
                    throw InvalidInput("distance table off-diagonal entries must be positive");
                if (d(i, t) != d(t, i))
                    throw InvalidInput("distance table is not symmetric at (" + std::to_string(i) + "," + std::to_string(t) + ")");
            }
        }
    }

    const SpaceVariant& variant() const noexcept { return v_; }

    template <class T>
    bool is() const noexcept { return std::holds_alternative<T>(v_); }

    bool is_finite() const noexcept { return is<PointCloud>() || is<FiniteRank>(); }

    std::size_t finite_size() const {
        if (const auto* pc = std::get_if<PointCloud>(&v_))
            return pc->table ? static_cast<std::size_t>(pc->table->rows()) : pc->points.size();
        if (const auto* fr = std::get_if<FiniteRank>(&v_)) return fr->ranks.size();
        throw InvalidInput("space is not finite");
    }

    // Number of doubles per stored point. Finite spaces store the index.
    std::size_t point_dimension() const noexcept {
        if (const auto* h = std::get_if<HypercubeWeighted>(&v_)) return static_cast<std::size_t>(h->dimension);
        return 1;
    }

    std::string name() const {
        return std::visit(
            [](const auto& s) -> std::string {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Interval>) return "interval";
                else if constexpr (std::is_same_v<T, Circle>) return "circle";
                else if constexpr (std::is_same_v<T, HypercubeWeighted>) return "hypercube_weighted";
                else if constexpr (std::is_same_v<T, PointCloud>) return "point_cloud";
                else return "finite_rank";
            },
            v_);
    }

    void check_point(std::span<const double> x) const {
        if (x.size() != point_dimension())
            throw InvalidInput("point has dimension " + std::to_string(x.size()) + ", space expects " +
                               std::to_string(point_dimension()));
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Interval> || std::is_same_v<T, HypercubeWeighted>) {
                    for (double c : x)
                        if (!(c >= 0.0 && c <= 1.0)) throw InvalidInput("point outside [0,1]");
                } else if constexpr (std::is_same_v<T, Circle>) {
                    if (!(x[0] >= 0.0 && x[0] < 1.0)) throw InvalidInput("circle point outside [0,1)");
                } else {
                    const double idx = x[0];
                    if (!(idx >= 0.0) || idx != std::floor(idx) || idx >= static_cast<double>(finite_size()))
                        throw InvalidInput("finite-space point is not a valid index");
                }
            },
            v_);
    }

    // Metric distance; validates both points. Rank-only spaces carry no metric.
    double distance(std::span<const double> x, std::span<const double> y) const {
        check_point(x);
        check_point(y);
        if (is<FiniteRank>()) throw InvalidInput("a rank-only space has no metric");
        return distance_unchecked(x.data(), y.data());
    }

    double distance_unchecked(const double* x, const double* y) const {
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Interval>) {
                    return std::abs(x[0] - y[0]);
                } else if constexpr (std::is_same_v<T, Circle>) {
                    const double a = std::abs(x[0] - y[0]);
                    return std::min(a, 1.0 - a);
                } else if constexpr (std::is_same_v<T, HypercubeWeighted>) {
                    double w = s.beta, acc = 0.0;
                    for (int i = 0; i < s.dimension; ++i, w *= s.beta) acc += w * std::abs(x[i] - y[i]);
                    return acc;
                } else if constexpr (std::is_same_v<T, PointCloud>) {
                    return cloud_distance(s, static_cast<std::size_t>(x[0]), static_cast<std::size_t>(y[0]));
                } else {
                    return static_cast<double>(s.ranks(static_cast<std::size_t>(x[0]), static_cast<std::size_t>(y[0])) - 1);
                }
            },
            v_);
    }

    // Largest possible distance (or projection span, for monitoring thresholds).
    double diameter() const {
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Interval>) return 1.0;
                else if constexpr (std::is_same_v<T, Circle>) return 0.5;
                else if constexpr (std::is_same_v<T, HypercubeWeighted>) {
                    double w = s.beta, acc = 0.0;
                    for (int i = 0; i < s.dimension; ++i, w *= s.beta) acc += w;
                    return acc;
                } else if constexpr (std::is_same_v<T, PointCloud>) {
                    const auto n = finite_size();
                    double m = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t t = i + 1; t < n; ++t) m = std::max(m, cloud_distance(s, i, t));
                    return m;
                } else {
                    return static_cast<double>(s.ranks.size() - 1);
                }
            },
            v_);
    }

    // Canonical 1-D summary statistic of a point: position on the interval,
    // arc position on the circle, distance to the origin in hypercubes and
    // Euclidean clouds, index for table/rank spaces.
    double projection(const double* x) const {
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, Interval> || std::is_same_v<T, Circle>) {
                    return x[0];
                } else if constexpr (std::is_same_v<T, HypercubeWeighted>) {
                    double w = s.beta, acc = 0.0;
                    for (int i = 0; i < s.dimension; ++i, w *= s.beta) acc += w * std::abs(x[i]);
                    return acc;
                } else if constexpr (std::is_same_v<T, PointCloud>) {
                    if (s.table) return x[0];
                    const auto& p = s.points[static_cast<std::size_t>(x[0])];
                    double acc = 0.0;
                    for (double c : p) acc += c * c;
                    return std::sqrt(acc);
                } else {
                    return x[0];
                }
            },
            v_);
    }

    // Full distance matrix of a finite metric space.
    Eigen::MatrixXd distance_matrix() const {
        const auto* pc = std::get_if<PointCloud>(&v_);
        if (!pc) throw InvalidInput("distance_matrix needs a point-cloud or table space");
        if (pc->table) return *pc->table;
        const auto n = pc->points.size();
        Eigen::MatrixXd d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t t = 0; t < n; ++t) d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = cloud_distance(*pc, i, t);
        return d;
    }

private:
    explicit Space(SpaceVariant v) : v_(std::move(v)) {}

    static double cloud_distance(const PointCloud& s, std::size_t i, std::size_t t) {
        if (s.table) return (*s.table)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
        const auto& a = s.points[i];
        const auto& b = s.points[t];
        double acc = 0.0;
        for (std::size_t c = 0; c < a.size(); ++c) acc += (a[c] - b[c]) * (a[c] - b[c]);
        return std::sqrt(acc);
    }

    SpaceVariant v_;
};

// ---------------------------------------------------------------------------
// Rank matrices and BTL spaces
// ---------------------------------------------------------------------------

// Throws TieError if a row has two equal distances.
inline RankMatrix rank_matrix_from_distances(const Eigen::MatrixXd& d) {
    Space::validate_distance_table(d);
    const auto n = static_cast<std::size_t>(d.rows());
    std::vector<int> ranks(n * n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::iota(idx.begin(), idx.end(), 0);
        const auto row = static_cast<Eigen::Index>(i);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return d(row, static_cast<Eigen::Index>(a)) < d(row, static_cast<Eigen::Index>(b));
        });
        for (std::size_t m = 0; m + 1 < n; ++m)
            if (d(row, static_cast<Eigen::Index>(idx[m])) == d(row, static_cast<Eigen::Index>(idx[m + 1])))
                throw TieError(i, std::min(idx[m], idx[m + 1]), std::max(idx[m], idx[m + 1]));
        for (std::size_t m = 0; m < n; ++m) ranks[i * n + idx[m]] = static_cast<int>(m + 1);
    }
    return RankMatrix(n, std::move(ranks));
}

inline bool has_row_ties(const Eigen::MatrixXd& d) {
    try {
        (void)rank_matrix_from_distances(d);
        return false;
    } catch (const TieError&) {
        return true;
    }
}

/// Unrooted binary tree with `leaves` leaves (nodes 0..leaves-1) and
/// leaves-2 internal nodes. Edges carry lengths.
struct BinaryTree {
    struct Edge {
        std::size_t u, v;
        double length;
    };
    std::size_t leaves = 0;
    std::vector<Edge> edges;

    std::size_t node_count() const noexcept { return leaves < 3 ? leaves : 2 * leaves - 2; }

    Eigen::MatrixXd leaf_distances() const {
        const auto nodes = node_count();
        std::vector<std::vector<std::pair<std::size_t, double>>> adj(nodes);
        for (const auto& e : edges) {
            adj[e.u].emplace_back(e.v, e.length);
            adj[e.v].emplace_back(e.u, e.length);
        }
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(leaves), static_cast<Eigen::Index>(leaves));
        std::vector<double> dist(nodes);
        std::vector<std::size_t> stack;
        std::vector<char> seen(nodes);
        for (std::size_t src = 0; src < leaves; ++src) {
            std::fill(seen.begin(), seen.end(), 0);
            stack.assign(1, src);
            dist[src] = 0.0;
            seen[src] = 1;
            while (!stack.empty()) {
                const auto u = stack.back();
                stack.pop_back();
                for (auto [v, len] : adj[u]) {
                    if (seen[v]) continue;
                    seen[v] = 1;
                    dist[v] = dist[u] + len;
                    stack.push_back(v);
                }
            }
            for (std::size_t t = 0; t < leaves; ++t)
                d(static_cast<Eigen::Index>(src), static_cast<Eigen::Index>(t)) = dist[t];
        }
        // Path sums in opposite directions can differ in the last bit.
        for (Eigen::Index a = 0; a < d.rows(); ++a)
            for (Eigen::Index b = a + 1; b < d.cols(); ++b) d(b, a) = d(a, b);
        return d;
    }
};

inline constexpr double btl_edge_min = 0.5;
inline constexpr double btl_edge_max = 1.5;

// Uniform unrooted topology by random edge subdivision; i.i.d. edge lengths
// uniform on (btl_edge_min, btl_edge_max).
inline BinaryTree random_btl_tree(std::size_t n_leaves, std::uint64_t seed) {
    if (n_leaves < 3) throw InvalidInput("BTL space needs at least 3 leaves");
    Xoshiro256 rng(derive_seed(seed, stream::initial));
    BinaryTree tree;
    tree.leaves = n_leaves;
    std::size_t next_internal = n_leaves;
    const std::size_t hub = next_internal++;
    for (std::size_t leaf = 0; leaf < 3; ++leaf) tree.edges.push_back({leaf, hub, 0.0});
    for (std::size_t leaf = 3; leaf < n_leaves; ++leaf) {
        const auto pick = static_cast<std::size_t>(rng.below(tree.edges.size()));
        const auto mid = next_internal++;
        const auto old = tree.edges[pick];
        tree.edges[pick] = {old.u, mid, 0.0};
        tree.edges.push_back({mid, old.v, 0.0});
        tree.edges.push_back({mid, leaf, 0.0});
    }
    auto draw_lengths = [&] {
        for (auto& e : tree.edges) e.length = btl_edge_min + (btl_edge_max - btl_edge_min) * rng.uniform();
    };
    auto all_distinct = [&](const Eigen::MatrixXd& d) {
        std::vector<double> v;
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            for (Eigen::Index t = i + 1; t < d.cols(); ++t) v.push_back(d(i, t));
        std::sort(v.begin(), v.end());
        return std::adjacent_find(v.begin(), v.end()) == v.end();
    };
    do {
        draw_lengths();
    } while (!all_distinct(tree.leaf_distances()));
    return tree;
}

inline Eigen::MatrixXd random_btl_space(std::size_t n_leaves, std::uint64_t seed) {
    return random_btl_tree(n_leaves, seed).leaf_distances();
}

}  // namespace jkmap

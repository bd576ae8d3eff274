#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "jkmap/error.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/order_statistics.hpp"
#include "jkmap/population.hpp"
#include "jkmap/rng.hpp"
#include "jkmap/spaces.hpp"

namespace jkmap {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// K^{theta,j,k} from the order-statistic identity.
///
/// From point i, the j'th closest of k samples has rank <= m exactly when at
/// least j samples have rank <= m, so with F_i(m) = theta{t : r(i,t) <= m}
///
///     K(i,t) = B_j(F_i(m)) - B_j(F_i(m-1)),   m = r(i,t),
///
/// where B_j(q) = P(Bin(k,q) >= j). Equal ranks only arise from repeated
/// samples of the same point, so no tie-breaking is needed. O(n^2 k).
inline KernelMatrix build_kernel(const RankMatrix& r, const Distribution& theta, int j, int k) {
    check_order(j, k);
    const auto n = r.size();
    if (theta.size() != n) throw InvalidInput("build_kernel: theta has the wrong length");
    Eigen::MatrixXd km(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ord = r.order(i);
        long double cum = 0.0L;
        double prev = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const auto t = ord[m];
            double cur;
            if (theta[t] == 0.0) {
                cur = prev;
            } else {
                cum += theta[t];
                const double f = (m + 1 == n) ? 1.0 : std::min(1.0, static_cast<double>(cum));
                cur = binomial_tail_ge(k, f, j);
            }
            km(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = std::max(0.0, cur - prev);
            prev = cur;
        }
        if (theta[ord[n - 1]] == 0.0) {
            // F_i(n) = 1 even if trailing ranks carry no mass; restore the telescoped total.
            const double last = 1.0 - prev;
            if (last > 0.0) {
                // Mass belongs to the highest-ranked point with positive weight.
                for (std::size_t m = n; m-- > 0;) {
                    if (theta[ord[m]] > 0.0) {
                        km(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ord[m])) += last;
                        break;
                    }
                }
            }
        }
    }
    return KernelMatrix(std::move(km));
}

inline constexpr double enumeration_budget = 1e7;

namespace detail {

inline void check_budget(std::size_t n, int k) {
    if (std::pow(static_cast<double>(n), k) > enumeration_budget)
        throw ComputationError("brute-force kernel: n^k = " + std::to_string(std::pow(static_cast<double>(n), k)) +
                               " exceeds the enumeration budget");
}

// Enumerates all n^k ordered sample tuples with positive weight, calling
// visit(samples, weight).
template <class Visit>
void for_each_tuple(const Distribution& theta, int k, Visit&& visit) {
    const auto n = theta.size();
    std::vector<std::size_t> tuple(static_cast<std::size_t>(k), 0);
    while (true) {
        double w = 1.0;
        for (auto s : tuple) w *= theta[s];
        if (w > 0.0) visit(tuple, w);
        std::size_t pos = 0;
        while (pos < tuple.size() && ++tuple[pos] == n) tuple[pos++] = 0;
        if (pos == tuple.size()) break;
    }
}

// Landing law for one start row given sample keys (smaller = closer).
// The j'th order position falls in a block of equal keys; every sample in
// that block is equally likely to occupy it.
template <class Key>
void accumulate_landing(const std::vector<std::size_t>& samples, double w, int j, Key&& key, std::vector<double>& row) {
    std::vector<double> keys(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s) keys[s] = key(samples[s]);
    std::vector<double> sorted = keys;
    std::nth_element(sorted.begin(), sorted.begin() + (j - 1), sorted.end());
    const double v = sorted[static_cast<std::size_t>(j - 1)];
    std::size_t tied = 0;
    for (double kv : keys) tied += (kv == v);
    for (std::size_t s = 0; s < samples.size(); ++s)
        if (keys[s] == v) row[samples[s]] += w / static_cast<double>(tied);
}

}  // namespace detail

/// Independent oracle: enumerate all n^k sample tuples.
inline KernelMatrix brute_force_kernel(const RankMatrix& r, const Distribution& theta, int j, int k) {
    check_order(j, k);
    const auto n = r.size();
    if (theta.size() != n) throw InvalidInput("brute_force_kernel: theta has the wrong length");
    detail::check_budget(n, k);
    Eigen::MatrixXd km = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        detail::for_each_tuple(theta, k, [&](const std::vector<std::size_t>& samples, double w) {
            detail::accumulate_landing(samples, w, j, [&](std::size_t s) { return static_cast<double>(r(i, s)); }, row);
        });
        for (std::size_t t = 0; t < n; ++t) km(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = row[t];
    }
    return KernelMatrix(std::move(km), 1e-10);
}

/// Brute-force kernel on a distance table, breaking distance ties between
/// distinct points uniformly at random.
inline KernelMatrix brute_force_kernel(const Eigen::MatrixXd& d, const Distribution& theta, int j, int k) {
    check_order(j, k);
    Space::validate_distance_table(d);
    const auto n = static_cast<std::size_t>(d.rows());
    if (theta.size() != n) throw InvalidInput("brute_force_kernel: theta has the wrong length");
    detail::check_budget(n, k);
    Eigen::MatrixXd km = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(row.begin(), row.end(), 0.0);
        detail::for_each_tuple(theta, k, [&](const std::vector<std::size_t>& samples, double w) {
            detail::accumulate_landing(
                samples, w, j, [&](std::size_t s) { return d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)); }, row);
        });
        for (std::size_t t = 0; t < n; ++t) km(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = row[t];
    }
    return KernelMatrix(std::move(km), 1e-10);
}

/// Geometry of a finite space as the exact engine sees it: a rank matrix when
/// all within-row distances are distinct, otherwise the raw distance table
/// (kernel then built by enumeration).
class FiniteGeometry {
public:
    explicit FiniteGeometry(RankMatrix r) : geom_(std::move(r)) {}

    static FiniteGeometry from_distances(const Eigen::MatrixXd& d) {
        try {
            return FiniteGeometry(rank_matrix_from_distances(d));
        } catch (const TieError&) {
            FiniteGeometry g;
            g.geom_ = d;
            return g;
        }
    }

    static FiniteGeometry from_space(const Space& space) {
        if (const auto* fr = std::get_if<FiniteRank>(&space.variant())) return FiniteGeometry(fr->ranks);
        return from_distances(space.distance_matrix());
    }

    std::size_t size() const {
        if (const auto* r = std::get_if<RankMatrix>(&geom_)) return r->size();
        return static_cast<std::size_t>(std::get<Eigen::MatrixXd>(geom_).rows());
    }

    bool has_ties() const noexcept { return std::holds_alternative<Eigen::MatrixXd>(geom_); }
    const RankMatrix* ranks() const noexcept { return std::get_if<RankMatrix>(&geom_); }

    KernelMatrix kernel(const Distribution& theta, int j, int k) const {
        if (const auto* r = std::get_if<RankMatrix>(&geom_)) return build_kernel(*r, theta, j, k);
        return brute_force_kernel(std::get<Eigen::MatrixXd>(geom_), theta, j, k);
    }

private:
    FiniteGeometry() = default;
    std::variant<RankMatrix, Eigen::MatrixXd> geom_;
};

// ---------------------------------------------------------------------------
// Stationary distributions and the map pi_{j,k}
// ---------------------------------------------------------------------------

inline constexpr std::size_t direct_solve_limit = 512;

inline double stationarity_residual(const KernelMatrix& k, const Eigen::RowVectorXd& x) {
    return (x * k.matrix() - x).lpNorm<1>();
}

/// Unique stationary law of K: dense solve up to direct_solve_limit states,
/// power iteration on the lazy chain (K+I)/2 beyond.
inline Distribution stationary(const KernelMatrix& k) {
    const auto n = static_cast<Eigen::Index>(k.size());
    const Eigen::MatrixXd& km = k.matrix();
    Eigen::RowVectorXd x;
    if (k.size() <= direct_solve_limit) {
        // Solve x (K - I) = 0 with sum(x) = 1: replace one equation by the normalization.
        Eigen::MatrixXd a = km.transpose() - Eigen::MatrixXd::Identity(n, n);
        a.row(n - 1).setOnes();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        b(n - 1) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (lu.rank() < n) throw ComputationError("stationary: chain does not have a unique stationary distribution");
        Eigen::VectorXd sol = lu.solve(b);
        for (int refine = 0; refine < 3; ++refine) {
            const Eigen::VectorXd res = b - a * sol;
            if (res.lpNorm<1>() < 1e-16) break;
            sol += lu.solve(res);
        }
        x = sol.transpose();
    } else {
        x = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
        const Eigen::MatrixXd lazy = 0.5 * (km + Eigen::MatrixXd::Identity(n, n));
        constexpr int max_iter = 1'000'000;
        int it = 0;
        for (; it < max_iter; ++it) {
            Eigen::RowVectorXd next = x * lazy;
            next /= next.sum();
            const double change = (next - x).lpNorm<1>();
            x = std::move(next);
            if (change < 1e-15) break;
        }
        if (it == max_iter) throw ComputationError("stationary: power iteration did not converge");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (x(i) < 0.0) {
            if (x(i) < -1e-10) throw ComputationError("stationary: solve produced a negative weight");
            x(i) = 0.0;
        }
    }
    x /= x.sum();
    if (stationarity_residual(k, x) > 1e-11) throw ComputationError("stationary: residual above tolerance");
    return Distribution::normalized(std::vector<double>(x.data(), x.data() + n));
}

inline Distribution stationary(const Eigen::MatrixXd& k) { return stationary(KernelMatrix(k)); }

namespace detail {

// Restores exact zeros outside the support of theta (pi preserves support).
inline Distribution restrict_support(const Distribution& pi, const Distribution& theta) {
    std::vector<double> w = pi.weights();
    for (std::size_t i = 0; i < w.size(); ++i)
        if (theta[i] == 0.0) w[i] = 0.0;
    return Distribution::normalized(std::move(w));
}

inline void check_sandwich([[maybe_unused]] const Distribution& theta, [[maybe_unused]] const Distribution& pi,
                           [[maybe_unused]] int k) {
#ifdef JKMAP_VERIFY_SANDWICH
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double lo = std::pow(theta[i], k), hi = k * theta[i];
        if (pi[i] < lo - 1e-12 || pi[i] > hi + 1e-12)
            throw std::logic_error("sandwich bound violated at state " + std::to_string(i));
    }
#endif
}

}  // namespace detail

/// pi_{j,k}(theta): stationary law of K^{theta,j,k}.
inline Distribution apply_pi(const FiniteGeometry& g, const Distribution& theta, int j, int k) {
    auto pi = detail::restrict_support(stationary(g.kernel(theta, j, k)), theta);
    detail::check_sandwich(theta, pi, k);
    return pi;
}

inline Distribution apply_pi(const RankMatrix& r, const Distribution& theta, int j, int k) {
    return apply_pi(FiniteGeometry(r), theta, j, k);
}

/// [theta, pi(theta), pi^2(theta), ...], n_steps + 1 entries.
inline std::vector<Distribution> iterate_exact(const FiniteGeometry& g, const Distribution& theta0, int j, int k,
                                               std::size_t n_steps) {
    check_order(j, k);
    std::vector<Distribution> out;
    out.reserve(n_steps + 1);
    out.push_back(theta0);
    for (std::size_t s = 0; s < n_steps; ++s) out.push_back(apply_pi(g, out.back(), j, k));
    return out;
}

inline std::vector<Distribution> iterate_exact(const RankMatrix& r, const Distribution& theta0, int j, int k,
                                               std::size_t n_steps) {
    return iterate_exact(FiniteGeometry(r), theta0, j, k, n_steps);
}

inline double fixed_point_residual(const FiniteGeometry& g, const Distribution& theta, int j, int k) {
    return l1_distance(apply_pi(g, theta, j, k), theta);
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

enum class Stability { stable, unstable, marginal };

inline const char* to_string(Stability s) noexcept {
    switch (s) {
        case Stability::stable: return "stable";
        case Stability::unstable: return "unstable";
        default: return "marginal";
    }
}

inline Stability stability_tag(double radius) noexcept {
    if (radius > 1.0 + 1e-6) return Stability::unstable;
    if (radius < 1.0 - 1e-6) return Stability::stable;
    return Stability::marginal;
}

inline constexpr double fixed_point_check_tolerance = 1e-8;

/// Spectral radius of the finite-difference Jacobian of theta -> pi(theta) on
/// the simplex tangent space at a fixed point. Coordinates: all weights except
/// the largest one, which absorbs the balance. Directions that would leave the
/// simplex use a one-sided difference.
inline double stability_spectrum(const FiniteGeometry& g, const Distribution& theta_star, int j, int k, double h = 1e-6) {
    const auto n = theta_star.size();
    if (fixed_point_residual(g, theta_star, j, k) > fixed_point_check_tolerance)
        throw InvalidInput("stability_spectrum: theta is not a fixed point");
    if (n == 1) return 0.0;
    const auto& w = theta_star.weights();
    const auto pivot = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
    std::vector<std::size_t> coords;
    for (std::size_t i = 0; i < n; ++i)
        if (i != pivot) coords.push_back(i);
    const auto m = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd jac(m, m);
    auto shifted = [&](std::size_t v, double step) {
        std::vector<double> x = w;
        x[v] += step;
        x[pivot] -= step;
        return Distribution::normalized(std::move(x));
    };
    const auto base = apply_pi(g, theta_star, j, k);
    for (Eigen::Index c = 0; c < m; ++c) {
        const auto v = coords[static_cast<std::size_t>(c)];
        Distribution plus = apply_pi(g, shifted(v, h), j, k);
        Distribution minus = base;
        double span = h;
        if (w[v] >= h) {
            minus = apply_pi(g, shifted(v, -h), j, k);
            span = 2.0 * h;
        }
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto u = coords[static_cast<std::size_t>(r)];
            jac(r, c) = (plus[u] - minus[u]) / span;
        }
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(jac, false);
    double radius = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) radius = std::max(radius, std::abs(es.eigenvalues()(i)));
    return radius;
}

inline double stability_spectrum(const RankMatrix& r, const Distribution& theta_star, int j, int k, double h = 1e-6) {
    return stability_spectrum(FiniteGeometry(r), theta_star, j, k, h);
}

// ---------------------------------------------------------------------------
// Fixed-point search
// ---------------------------------------------------------------------------

struct FixedPointReport {
    Distribution theta_star;
    double residual = 0.0;
    std::size_t support_size = 0;
    double spectral_radius = 0.0;
    Stability stability = Stability::marginal;
    bool omnipresent = false;  // a point mass or a uniform two-point law
};

// Candidates with a support weight below this are attributed to a lower face.
inline constexpr double stray_mass = 1e-5;

struct FixedPointSearchOptions {
    std::size_t n_restarts = 64;        // Dirichlet(1,...,1) starts on the full simplex
    double tol = 1e-10;                 // residual bound ||pi(theta) - theta||_1
    std::uint64_t seed = 1;
    std::optional<bool> search_faces;   // also search lower-dimensional faces (default: n <= 8)
    std::size_t face_restarts = 4;      // starts per face of size >= 3
    int max_newton_steps = 100;
};

namespace detail {

// Newton on G(theta) = pi(theta) - theta restricted to the face `support`,
// parameterized by all support weights but the last. Steps are only shortened
// to stay inside the face. With `deflate`, G is multiplied by
// prod_r (1 + 1/|theta - r|^2) over the point masses and uniform two-point
// laws of the face, and over `known` roots, so those stop capturing the iterate.
// Returns nullopt when the iterate drifts onto a lower face or fails to converge.
// Newton gives up once the residual has not halved for this many steps.
inline constexpr int stall_steps = 12;

inline std::optional<Distribution> newton_on_face(const FiniteGeometry& g, const std::vector<std::size_t>& support,
                                                  std::vector<double> start, int j, int k, double tol, int max_steps,
                                                  bool deflate = false, const std::vector<Distribution>& known = {}) {
    const auto n = g.size();
    const auto m = support.size();
    const auto vars = static_cast<Eigen::Index>(m - 1);
    auto embed = [&](const Eigen::VectorXd& x) -> std::optional<Distribution> {
        std::vector<double> w(n, 0.0);
        double rest = 1.0;
        for (Eigen::Index v = 0; v < vars; ++v) {
            if (!(x(v) > 0.0)) return std::nullopt;
            w[support[static_cast<std::size_t>(v)]] = x(v);
            rest -= x(v);
        }
        if (!(rest > 0.0)) return std::nullopt;
        w[support.back()] = rest;
        return Distribution::normalized(std::move(w));
    };
    auto deflation = [&](const Distribution& theta) {
        double factor = 1.0;
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a; b < m; ++b) {
                double sq = 0.0;
                for (std::size_t s = 0; s < m; ++s) {
                    const double target = s == a && s == b ? 1.0 : (s == a || s == b ? 0.5 : 0.0);
                    const double d = theta[support[s]] - target;
                    sq += d * d;
                }
                factor *= 1.0 + 1.0 / sq;
            }
        for (const auto& r : known) {
            double sq = 0.0;
            for (std::size_t s = 0; s < m; ++s) {
                const double d = theta[support[s]] - r[support[s]];
                sq += d * d;
            }
            factor *= 1.0 + 1.0 / sq;
        }
        return factor;
    };
    // Fills the (possibly deflated) G and returns the true l1 residual.
    auto residual_vec = [&](const Distribution& theta, Eigen::VectorXd& gvec) {
        const auto pi = apply_pi(g, theta, j, k);
        const double factor = deflate ? deflation(theta) : 1.0;
        gvec.resize(vars);
        double full = 0.0;
        for (std::size_t s = 0; s < m; ++s) {
            const double d = pi[support[s]] - theta[support[s]];
            full += std::abs(d);
            if (s + 1 < m) gvec(static_cast<Eigen::Index>(s)) = factor * d;
        }
        return full;
    };
    auto damped = [&](Eigen::VectorXd& x, int steps) -> bool {
        for (int s = 0; s < steps; ++s) {
            auto theta = embed(x);
            if (!theta) return false;
            const auto pi = apply_pi(g, *theta, j, k);
            for (Eigen::Index v = 0; v < vars; ++v)
                x(v) = 0.5 * x(v) + 0.5 * pi[support[static_cast<std::size_t>(v)]];
        }
        return true;
    };

    Eigen::VectorXd x(vars);
    for (Eigen::Index v = 0; v < vars; ++v) x(v) = start[static_cast<std::size_t>(v)];
    if (!damped(x, 2)) return std::nullopt;

    Eigen::VectorXd gvec, gp, gm;
    std::optional<Distribution> theta;
    double res = 0.0;
    const double fd_step = 1e-7;
    int polish = 0;
    double best = std::numeric_limits<double>::infinity();
    int best_step = 0;
    for (int step = 0; step <= max_steps; ++step) {
        theta = embed(x);
        if (!theta) return std::nullopt;
        res = residual_vec(*theta, gvec);
        if (res <= tol && (++polish > 2 || res < 1e-15)) break;
        if (step == max_steps) break;
        if (res < 0.5 * best) best = res, best_step = step;
        if (step - best_step > stall_steps) return std::nullopt;
        for (auto s : support)
            if ((*theta)[s] < stray_mass) return std::nullopt;

        Eigen::MatrixXd jac(vars, vars);
        for (Eigen::Index c = 0; c < vars; ++c) {
            Eigen::VectorXd xp = x, xm = x;
            xp(c) += fd_step;
            xm(c) -= fd_step;
            auto tp = embed(xp), tm = embed(xm);
            double span = 2.0 * fd_step;
            if (!tp) tp = theta, span = fd_step;
            if (!tm) tm = theta, span = fd_step;
            residual_vec(*tp, gp);
            residual_vec(*tm, gm);
            jac.col(c) = (gp - gm) / span;
        }
        Eigen::VectorXd delta = jac.colPivHouseholderQr().solve(-gvec);
        if (!delta.allFinite()) {
            if (!damped(x, 10)) return std::nullopt;
            continue;
        }
        double alpha = 1.0;
        int halvings = 0;
        while (!embed(x + alpha * delta) && halvings++ < 40) alpha *= 0.5;
        if (halvings > 40) return std::nullopt;
        x += alpha * delta;
    }
    if (res > tol) return std::nullopt;
    return theta;
}

inline std::vector<std::vector<std::size_t>> faces_of_size(std::size_t n, std::size_t size) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    auto rec = [&](auto&& self, std::size_t from) -> void {
        if (cur.size() == size) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = from; i < n; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

}  // namespace detail

inline FixedPointReport make_report(const FiniteGeometry& g, Distribution theta, int j, int k, bool omnipresent = false) {
    FixedPointReport rep;
    rep.residual = fixed_point_residual(g, theta, j, k);
    rep.support_size = theta.support_size();
    rep.spectral_radius = stability_spectrum(g, theta, j, k);
    rep.stability = stability_tag(rep.spectral_radius);
    rep.omnipresent = omnipresent;
    rep.theta_star = std::move(theta);
    return rep;
}

/// Fixed points of pi_{j,k} on a finite space.
///
/// Always checks every point mass and uniform two-point law. Sporadic fixed
/// points are sought by Newton's method from Dirichlet(1,...,1) starts on the
/// full simplex and, when enabled, on every face with at least three points.
/// Results are deduplicated at l1 radius 10*tol and sorted.
inline std::vector<FixedPointReport> find_fixed_points(const FiniteGeometry& g, int j, int k,
                                                       const FixedPointSearchOptions& opt = {}) {
    check_order(j, k);
    if (opt.n_restarts < 1) throw InvalidInput("find_fixed_points: n_restarts must be >= 1");
    const auto n = g.size();
    std::vector<FixedPointReport> found;

    for (std::size_t s = 0; s < n; ++s) {
        auto rep = make_report(g, Distribution::point_mass(n, s), j, k, true);
        if (rep.residual <= opt.tol) found.push_back(std::move(rep));
    }
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            auto rep = make_report(g, Distribution::two_point(n, a, b), j, k, true);
            if (rep.residual <= opt.tol) found.push_back(std::move(rep));
        }

    std::vector<Distribution> candidates;
    const bool faces = opt.search_faces.value_or(n <= 8);
    std::uint64_t face_id = 0;
    for (std::size_t size = 3; size <= n; ++size) {
        if (size < n && !faces) continue;
        const auto restarts = size == n ? opt.n_restarts : opt.face_restarts;
        for (const auto& face : detail::faces_of_size(n, size)) {
            ++face_id;
            // roots seen on this face; later runs are deflated against them
            std::vector<Distribution> face_roots;
            auto keep = [&](std::optional<Distribution> fp) {
                if (!fp) return false;
                for (const auto& r : face_roots)
                    if (l1_distance(r, *fp) <= 10.0 * opt.tol) return false;
                face_roots.push_back(*fp);
                candidates.push_back(std::move(*fp));
                return true;
            };
            for (std::size_t r = 0; r < restarts; ++r) {
                Xoshiro256 rng(derive_seed(opt.seed, stream::restarts, face_id, r));
                std::vector<double> start(size);
                double total = 0.0;
                for (auto& v : start) total += (v = -std::log1p(-rng.uniform()));
                for (auto& v : start) v /= total;
                keep(detail::newton_on_face(g, face, start, j, k, opt.tol, opt.max_newton_steps));
                for (int again = 0; again < 4; ++again)
                    if (!keep(detail::newton_on_face(g, face, start, j, k, opt.tol, opt.max_newton_steps, true, face_roots))) break;
            }
        }
    }

    std::sort(candidates.begin(), candidates.end(),
              [](const Distribution& a, const Distribution& b) { return a.weights() < b.weights(); });
    const double radius = 10.0 * opt.tol;
    for (auto& c : candidates) {
        // Near an omnipresent law G is flat in the directions leaving its
        // support, so Newton can stop within tol at a point carrying a few
        // 1e-7 of stray mass. Such points belong to the smaller face.
        if (std::any_of(c.weights().begin(), c.weights().end(), [](double w) { return w > 0.0 && w < stray_mass; })) continue;
        const bool dup = std::any_of(found.begin(), found.end(),
                                     [&](const FixedPointReport& f) { return l1_distance(f.theta_star, c) <= radius; });
        if (dup) continue;
        auto rep = make_report(g, std::move(c), j, k, false);
        if (rep.residual <= opt.tol) found.push_back(std::move(rep));
    }

    std::stable_sort(found.begin(), found.end(), [](const FixedPointReport& a, const FixedPointReport& b) {
        if (a.support_size != b.support_size) return a.support_size < b.support_size;
        return a.theta_star.weights() > b.theta_star.weights();
    });
    return found;
}

inline std::vector<FixedPointReport> find_fixed_points(const RankMatrix& r, int j, int k,
                                                       const FixedPointSearchOptions& opt = {}) {
    return find_fixed_points(FiniteGeometry(r), j, k, opt);
}

// ---------------------------------------------------------------------------
// Rank-matrix feasibility
// ---------------------------------------------------------------------------

/// Looks for a distance matrix realizing R.
///
/// Entries are confined to [1,2], which makes every triangle inequality hold.
/// Consecutive ranks in each row must differ by at least `margin`. These are
/// difference constraints x_v - x_u <= w over the n(n-1)/2 distances, so
/// Bellman-Ford either returns a solution or exhibits a negative cycle. The
/// solution is then jittered by less than margin/4 until all entries are
/// distinct. nullopt means "not found at this margin", nothing stronger.
inline std::optional<Eigen::MatrixXd> feasibility_search(const RankMatrix& r, double margin = 1e-3, std::uint64_t seed = 1) {
    if (!(margin > 0.0)) throw InvalidInput("feasibility_search: margin must be positive");
    const auto n = r.size();
    if (n == 1) return Eigen::MatrixXd::Zero(1, 1);
    auto var = [n](std::size_t a, std::size_t b) {
        if (a > b) std::swap(a, b);
        return a * n - a * (a + 1) / 2 + (b - a - 1);
    };
    const std::size_t nv = n * (n - 1) / 2;
    const std::size_t origin = nv;  // x_origin = 0 after shifting
    struct Edge {
        std::size_t from, to;
        double w;
    };
    std::vector<Edge> edges;
    const double lo = 1.0 + margin / 4.0, hi = 2.0 - margin / 4.0;
    for (std::size_t v = 0; v < nv; ++v) {
        edges.push_back({origin, v, hi});   // x_v - x_0 <= hi
        edges.push_back({v, origin, -lo});  // x_0 - x_v <= -lo
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto ord = r.order(i);
        for (std::size_t m = 1; m + 1 < n; ++m)  // rank m+1 closer than rank m+2
            edges.push_back({var(i, ord[m + 1]), var(i, ord[m]), -margin});
    }
    std::vector<double> dist(nv + 1, 0.0);
    bool changed = true;
    for (std::size_t pass = 0; pass <= nv + 1 && changed; ++pass) {
        changed = false;
        for (const auto& e : edges) {
            if (dist[e.from] + e.w < dist[e.to] - 1e-15) {
                dist[e.to] = dist[e.from] + e.w;
                changed = true;
            }
        }
    }
    if (changed) return std::nullopt;  // negative cycle

    std::vector<double> base(nv);
    for (std::size_t v = 0; v < nv; ++v) base[v] = dist[v] - dist[origin];

    Xoshiro256 rng(derive_seed(seed, stream::jitter));
    for (int attempt = 0; attempt < 100; ++attempt) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        std::vector<double> vals(nv);
        for (std::size_t v = 0; v < nv; ++v) vals[v] = base[v] + (rng.uniform() - 0.5) * (margin / 4.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = a + 1; b < n; ++b) {
                const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
                d(ia, ib) = d(ib, ia) = vals[var(a, b)];
            }
        std::sort(vals.begin(), vals.end());
        if (std::adjacent_find(vals.begin(), vals.end()) != vals.end()) continue;
        try {
            if (rank_matrix_from_distances(d) == r) return d;
        } catch (const TieError&) {
        }
    }
    throw ComputationError("feasibility_search: could not separate entries after jitter");
}

}  // namespace jkmap

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "jkmap/error.hpp"
#include "jkmap/order_statistics.hpp"
#include "jkmap/population.hpp"
#include "jkmap/rng.hpp"
#include "jkmap/spaces.hpp"

namespace jkmap {

enum class MixingMode { bound, adaptive, fixed };

inline const char* to_string(MixingMode m) noexcept {
    switch (m) {
        case MixingMode::bound: return "bound";
        case MixingMode::adaptive: return "adaptive";
        default: return "fixed";
    }
}

/// 2 * ceil(ln(1/eps) / -ln(1 - 1/k^(k-1))).
inline std::size_t bound_steps(int k, double epsilon) {
    if (k < 2) throw InvalidInput("bound_steps: k must be >= 2");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("bound_steps: epsilon must lie in (0,1)");
    const double rate = -std::log1p(-std::pow(static_cast<double>(k), -(k - 1.0)));
    return 2 * static_cast<std::size_t>(std::ceil(std::log(1.0 / epsilon) / rate));
}

inline constexpr double default_cap_epsilon = 1e-3;

struct MixingPolicy {
    MixingMode mode = MixingMode::adaptive;
    double epsilon = 1e-3;        // bound mode
    double w1_tol = 1e-4;         // adaptive
    std::size_t check_stride = 8; // adaptive
    bool noise_floor = true;      // adaptive: never demand W1 below the split-half W1
    std::optional<std::size_t> t_cap;  // default: bound_steps(k, 1e-3)
    std::size_t fixed_steps = 0;  // fixed mode

    static MixingPolicy bound(double eps = 1e-3) {
        MixingPolicy p;
        p.mode = MixingMode::bound;
        p.epsilon = eps;
        return p;
    }
    static MixingPolicy adaptive(double w1_tol = 1e-4, std::size_t stride = 8) {
        MixingPolicy p;
        p.w1_tol = w1_tol;
        p.check_stride = stride;
        return p;
    }
    static MixingPolicy fixed(std::size_t t) {
        MixingPolicy p;
        p.mode = MixingMode::fixed;
        p.fixed_steps = t;
        return p;
    }

    void validate() const {
        if (mode == MixingMode::bound && !(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("mixing: epsilon must lie in (0,1)");
        if (mode == MixingMode::adaptive) {
            if (!(w1_tol > 0.0)) throw InvalidInput("mixing: w1_tol must be positive");
            if (check_stride == 0) throw InvalidInput("mixing: check_stride must be >= 1");
        }
        if (mode == MixingMode::fixed && fixed_steps == 0) throw InvalidInput("mixing: fixed T must be >= 1");
        if (t_cap && *t_cap == 0) throw InvalidInput("mixing: T_cap must be >= 1");
    }

    std::size_t cap(int k) const { return t_cap.value_or(bound_steps(k, default_cap_epsilon)); }

    // Steps for non-adaptive modes.
    std::size_t steps(int k) const {
        if (mode == MixingMode::fixed) return fixed_steps;
        const auto t = bound_steps(k, epsilon);
        return t_cap ? std::min(t, *t_cap) : t;
    }
};

/// Per-call record of how the chain was run.
struct MixingReport {
    std::size_t steps = 0;
    bool cap_reached = false;
    std::vector<double> w1_trace;     // W1 between successive checks (adaptive)
    std::vector<double> noise_trace;  // split-half W1 at each check (adaptive)
};

namespace detail {

inline constexpr int max_k = 64;

// Index of the j'th closest of k samples; ties resolved uniformly within the tied block.
template <class Dist>
inline std::size_t select_jth(const Dist& dist, std::size_t x, std::size_t n_source, int j, int k, Xoshiro256& rng) {
    double d[max_k];
    std::size_t id[max_k];
    for (int s = 0; s < k; ++s) {
        const auto idx = static_cast<std::size_t>(rng.below(n_source));
        const double v = dist(x, idx);
        int p = s;
        while (p > 0 && d[p - 1] > v) {
            d[p] = d[p - 1];
            id[p] = id[p - 1];
            --p;
        }
        d[p] = v;
        id[p] = idx;
    }
    const double target = d[j - 1];
    int lo = j - 1, hi = j;
    while (lo > 0 && d[lo - 1] == target) --lo;
    while (hi < k && d[hi] == target) ++hi;
    if (hi - lo == 1) return id[j - 1];
    return id[lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo)))];
}

// Distance between source particles a and b.
struct LineDist {
    const double* x;
    double operator()(std::size_t a, std::size_t b) const { return std::abs(x[a] - x[b]); }
};
struct CircleDist {
    const double* x;
    double operator()(std::size_t a, std::size_t b) const {
        const double t = std::abs(x[a] - x[b]);
        return std::min(t, 1.0 - t);
    }
};
struct CubeDist {
    const double* x;
    std::vector<double> w;
    double operator()(std::size_t a, std::size_t b) const {
        const auto d = w.size();
        const double* p = x + a * d;
        const double* q = x + b * d;
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += w[c] * std::abs(p[c] - q[c]);
        return acc;
    }
};
struct TableDist {
    std::vector<std::uint32_t> atom;  // source particle -> point index
    std::vector<double> table;        // n x n, row-major
    std::size_t n;
    double operator()(std::size_t a, std::size_t b) const { return table[atom[a] * n + atom[b]]; }
};

template <class F>
inline void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    threads = std::max<std::size_t>(1, std::min(threads, n / 1024 + 1));
    if (threads == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

// Marginal of the particle states as counts on source particles sorted by projection.
struct ProjectionOrder {
    std::vector<std::uint32_t> rank;  // source particle -> position in sorted order
    std::vector<double> sorted;       // projections, ascending
};

inline ProjectionOrder projection_order(const ParticlePopulation& source) {
    const auto proj = source.projections();
    std::vector<std::uint32_t> order(proj.size());
    std::iota(order.begin(), order.end(), 0U);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return proj[a] < proj[b]; });
    ProjectionOrder out;
    out.rank.resize(proj.size());
    out.sorted.resize(proj.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        out.rank[order[r]] = static_cast<std::uint32_t>(r);
        out.sorted[r] = proj[order[r]];
    }
    return out;
}

// W1 between two weighted laws on the same sorted support: integral of |F - G|.
inline double w1_on_support(const std::vector<double>& sorted, const std::vector<double>& f, const std::vector<double>& g) {
    double cf = 0.0, cg = 0.0, acc = 0.0;
    for (std::size_t r = 0; r + 1 < sorted.size(); ++r) {
        cf += f[r];
        cg += g[r];
        acc += std::abs(cf - cg) * (sorted[r + 1] - sorted[r]);
    }
    return acc;
}

}  // namespace detail

inline std::size_t default_threads() {
    const auto h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

/// One chain step from x: draw k source points with replacement, move to the
/// j'th closest. Exact distance ties are broken uniformly.
inline std::vector<double> chain_step(const ParticlePopulation& source, std::span<const double> x, int j, int k, Xoshiro256& rng) {
    check_order(j, k);
    if (k > detail::max_k) throw InvalidInput("chain_step: k too large");
    const auto& space = source.space();
    space.check_point(x);
    const auto dim = source.dimension();
    auto dist = [&](std::size_t, std::size_t b) { return space.distance_unchecked(x.data(), source.data() + b * dim); };
    const auto idx = detail::select_jth(dist, 0, source.size(), j, k, rng);
    const auto p = source.point(idx);
    return {p.begin(), p.end()};
}

/// Evolves every particle of `source` for T steps of the (j,k) chain driven by
/// the frozen source law. Particle i starts at source point i and uses the
/// stream (seed, chain, generation+1, i).
inline ParticlePopulation estimate_pi(const ParticlePopulation& source, int j, int k, const MixingPolicy& policy,
                                      std::uint64_t seed, MixingReport* report = nullptr,
                                      std::size_t threads = default_threads()) {
    check_order(j, k);
    if (k > detail::max_k) throw InvalidInput("estimate_pi: k too large");
    policy.validate();
    const auto n = source.size();
    if (n > std::numeric_limits<std::uint32_t>::max()) throw InvalidInput("estimate_pi: population too large");
    const auto generation = source.generation() + 1;
    const auto& space = source.space();

    std::vector<std::uint32_t> state(n);
    std::iota(state.begin(), state.end(), 0U);
    std::vector<Xoshiro256> rngs;
    rngs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rngs.emplace_back(derive_seed(seed, stream::chain, generation, i));

    MixingReport local;
    MixingReport& rep = report ? *report : local;
    rep = MixingReport{};

    auto run = [&](const auto& dist) {
        auto advance = [&](std::size_t steps) {
            detail::parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t p = lo; p < hi; ++p) {
                    std::size_t cur = state[p];
                    for (std::size_t t = 0; t < steps; ++t) cur = detail::select_jth(dist, cur, n, j, k, rngs[p]);
                    state[p] = static_cast<std::uint32_t>(cur);
                }
            });
            rep.steps += steps;
        };

        if (policy.mode != MixingMode::adaptive) {
            advance(policy.steps(k));
            return;
        }

        // Adaptive: every check_stride steps compare the marginal with the one
        // from roughly half as many steps back (snapshots at checks 1,2,4,...).
        // Unless disabled, the threshold is raised to the split-half W1 so that
        // Monte Carlo noise alone cannot keep the run going.
        const auto cap = policy.cap(k);
        const auto order = detail::projection_order(source);
        const double unit = 1.0 / static_cast<double>(n);
        auto marginal = [&]() {
            std::vector<double> f(n, 0.0);
            for (auto s : state) f[order.rank[s]] += unit;
            return f;
        };
        auto halves_w1 = [&]() {
            if (n < 4) return 0.0;
            std::vector<double> a(n, 0.0), b(n, 0.0);
            const double ua = 1.0 / static_cast<double>((n + 1) / 2), ub = 1.0 / static_cast<double>(n / 2);
            for (std::size_t p = 0; p < n; ++p) (p % 2 == 0 ? a : b)[order.rank[state[p]]] += p % 2 == 0 ? ua : ub;
            return detail::w1_on_support(order.sorted, a, b);
        };
        std::vector<double> older = marginal(), newer;  // snapshots at checks c1/2 and c1
        std::size_t c1 = 0, check = 0;
        int calm = 0;
        while (rep.steps < cap) {
            advance(std::min(policy.check_stride, cap - rep.steps));
            ++check;
            auto cur = marginal();
            const auto& ref = (c1 > 0 && 2 * c1 <= check) ? newer : older;
            const double w1 = detail::w1_on_support(order.sorted, ref, cur);
            const double noise = policy.noise_floor ? halves_w1() : 0.0;
            rep.w1_trace.push_back(w1);
            rep.noise_trace.push_back(noise);
            calm = w1 <= std::max(policy.w1_tol, noise) ? calm + 1 : 0;
            if (calm >= 2) return;
            if ((check & (check - 1)) == 0) {  // power of two
                if (c1 > 0) older = std::move(newer);
                newer = std::move(cur);
                c1 = check;
            }
        }
        rep.cap_reached = true;
    };

    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Interval>) {
                run(detail::LineDist{source.data()});
            } else if constexpr (std::is_same_v<T, Circle>) {
                run(detail::CircleDist{source.data()});
            } else if constexpr (std::is_same_v<T, HypercubeWeighted>) {
                detail::CubeDist d{source.data(), {}};
                double w = s.beta;
                for (int c = 0; c < s.dimension; ++c, w *= s.beta) d.w.push_back(w);
                run(d);
            } else {
                detail::TableDist d;
                d.n = space.finite_size();
                d.table.resize(d.n * d.n);
                for (std::size_t a = 0; a < d.n; ++a)
                    for (std::size_t b = 0; b < d.n; ++b) {
                        const double xa = static_cast<double>(a), xb = static_cast<double>(b);
                        d.table[a * d.n + b] = space.distance_unchecked(&xa, &xb);
                    }
                d.atom.resize(n);
                for (std::size_t p = 0; p < n; ++p) d.atom[p] = static_cast<std::uint32_t>(source.data()[p]);
                run(d);
            }
        },
        space.variant());

    const auto dim = source.dimension();
    std::vector<double> coords(n * dim);
    for (std::size_t p = 0; p < n; ++p)
        std::copy_n(source.data() + static_cast<std::size_t>(state[p]) * dim, dim, coords.data() + p * dim);
    SeedRecord lineage;
    lineage.master = seed;
    lineage.generation = generation;
    lineage.chain_steps = rep.steps;
    lineage.cap_reached = rep.cap_reached;
    return ParticlePopulation(space, std::move(coords), generation, lineage);
}

}  // namespace jkmap

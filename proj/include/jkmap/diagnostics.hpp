#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "jkmap/error.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/population.hpp"
#include "jkmap/spaces.hpp"

namespace jkmap {

struct Cluster {
    double center = 0.0;  // weighted median of the projection
    double mass = 0.0;
    double sd = 0.0;
    std::size_t count = 0;
};

inline constexpr std::array<double, 7> summary_quantile_levels = {0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99};
inline constexpr double cluster_gap_factor = 20.0;
inline constexpr double cluster_floor_fraction = 1e-4;
inline constexpr double core_mass_fraction = 1e-3;

struct IterateSummary {
    std::uint64_t generation = 0;
    std::vector<double> mean;                  // per coordinate (index for table spaces)
    double projection_mean = 0.0;
    double sd = 0.0;                           // of the canonical projection
    std::array<double, 7> quantiles{};
    std::vector<Cluster> clusters;             // sorted by decreasing mass
    std::optional<double> separation;          // distance between the two heaviest clusters
    std::size_t chain_steps = 0;
    std::vector<std::string> flags;
};

namespace detail {

// Weighted sample of the projection, sorted by value.
struct WeightedValues {
    std::vector<double> x;
    std::vector<double> w;  // unnormalized
    double total = 0.0;
};

inline double weighted_quantile(const WeightedValues& v, double level) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.x.size(); ++i) {
        acc += v.w[i];
        if (acc >= (level - 1e-15) * v.total) return v.x[i];
    }
    return v.x.back();
}

inline Cluster make_cluster(const WeightedValues& v, std::size_t lo, std::size_t hi) {
    Cluster c;
    c.count = hi - lo;
    double mass = 0.0, mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        mass += v.w[i];
        mean += v.w[i] * v.x[i];
    }
    mean /= mass;
    double ss = 0.0, acc = 0.0;
    bool median_set = false;
    for (std::size_t i = lo; i < hi; ++i) {
        ss += v.w[i] * (v.x[i] - mean) * (v.x[i] - mean);
        acc += v.w[i];
        if (!median_set && acc >= 0.5 * mass) {
            c.center = v.x[i];
            median_set = true;
        }
    }
    c.mass = mass / v.total;
    c.sd = std::sqrt(ss / mass);
    return c;
}

// Normal-calibrated 5-95% range of v[lo,hi): an sd estimate that ignores
// thin straggler tails.
inline double robust_spread(const WeightedValues& v, std::size_t lo, std::size_t hi) {
    double mass = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mass += v.w[i];
    double acc = 0.0, q05 = v.x[lo], q95 = v.x[hi - 1];
    bool low_set = false;
    for (std::size_t i = lo; i < hi; ++i) {
        acc += v.w[i];
        if (!low_set && acc >= 0.05 * mass) {
            q05 = v.x[i];
            low_set = true;
        }
        if (acc >= 0.95 * mass) {
            q95 = v.x[i];
            break;
        }
    }
    return (q95 - q05) / 3.2897;
}

// Single-linkage clustering: cut every gap between core points above a threshold T. T is the
// smallest fixed point of T = max(cluster_gap_factor * pooled within-cluster
// spread, floor), found by iterating upward from the floor.
inline void split_clusters(const WeightedValues& v, double floor, std::vector<Cluster>& out) {
    out.clear();
    const auto n = v.x.size();
    if (n == 0) return;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    // Only core points (holding at least core_mass_fraction of the mass within
    // +-threshold) may link; thin stragglers strung between two clusters would
    // otherwise chain them. Non-core points go to the nearer core neighbour.
    std::vector<char> core(n);
    auto cut = [&](double threshold) {
        std::size_t a = 0, b = 0;
        double window = 0.0;
        bool any_core = false;
        for (std::size_t i = 0; i < n; ++i) {
            while (b < n && v.x[b] - v.x[i] <= threshold) window += v.w[b++];
            while (v.x[i] - v.x[a] > threshold) window -= v.w[a++];
            core[i] = window >= core_mass_fraction * v.total;
            any_core = any_core || core[i];
        }
        ranges.clear();
        std::size_t lo = 0;
        if (!any_core) {
            for (std::size_t i = 1; i <= n; ++i)
                if (i == n || v.x[i] - v.x[i - 1] > threshold) {
                    ranges.emplace_back(lo, i);
                    lo = i;
                }
            return;
        }
        std::size_t prev = n;  // last core index
        for (std::size_t i = 0; i < n; ++i) {
            if (!core[i]) continue;
            if (prev != n && v.x[i] - v.x[prev] > threshold) {
                // split the non-core run between prev and i at the midpoint
                const double mid = 0.5 * (v.x[prev] + v.x[i]);
                std::size_t s = prev + 1;
                while (s < i && v.x[s] <= mid) ++s;
                ranges.emplace_back(lo, s);
                lo = s;
            }
            prev = i;
        }
        ranges.emplace_back(lo, n);
    };
    double threshold = floor;
    cut(threshold);
    for (int iter = 0; iter < 100; ++iter) {
        double pooled = 0.0, mass = 0.0;
        for (auto [lo, hi] : ranges) {
            double m = 0.0;
            for (std::size_t i = lo; i < hi; ++i) m += v.w[i];
            const double r = robust_spread(v, lo, hi);
            pooled += m * r * r;
            mass += m;
        }
        const double next = std::max(cluster_gap_factor * std::sqrt(pooled / mass), floor);
        if (next <= threshold) break;
        threshold = next;
        cut(threshold);
    }
    for (auto [lo, hi] : ranges) out.push_back(make_cluster(v, lo, hi));
}

inline WeightedValues sorted_weighted(std::vector<double> x, std::vector<double> w) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    WeightedValues v;
    v.x.reserve(x.size());
    v.w.reserve(x.size());
    for (auto i : idx) {
        v.x.push_back(x[i]);
        v.w.push_back(w[i]);
        v.total += w[i];
    }
    return v;
}

// Circle: rotate so the largest circular gap is the seam; values become
// monotone arc positions possibly exceeding 1.
inline void unwrap_circle(WeightedValues& v) {
    if (v.x.size() < 2) return;
    std::size_t seam = 0;
    double best = v.x.front() + 1.0 - v.x.back();
    for (std::size_t i = 1; i < v.x.size(); ++i) {
        const double g = v.x[i] - v.x[i - 1];
        if (g > best) {
            best = g;
            seam = i;
        }
    }
    if (seam == 0) return;
    std::rotate(v.x.begin(), v.x.begin() + static_cast<std::ptrdiff_t>(seam), v.x.end());
    std::rotate(v.w.begin(), v.w.begin() + static_cast<std::ptrdiff_t>(seam), v.w.end());
    for (std::size_t i = v.x.size() - seam; i < v.x.size(); ++i) v.x[i] += 1.0;
}

inline IterateSummary summarize_weighted(WeightedValues v, std::vector<double> mean, std::uint64_t generation,
                                         const Space& space) {
    IterateSummary s;
    s.generation = generation;
    s.mean = std::move(mean);
    // shifted by x[0] so a constant sample has sd exactly 0
    const double x0 = v.x.front();
    double m = 0.0;
    for (std::size_t i = 0; i < v.x.size(); ++i) m += v.w[i] * (v.x[i] - x0);
    m /= v.total;
    double ss = 0.0;
    for (std::size_t i = 0; i < v.x.size(); ++i) ss += v.w[i] * (v.x[i] - x0 - m) * (v.x[i] - x0 - m);
    s.projection_mean = x0 + m;
    s.sd = std::sqrt(ss / v.total);
    for (std::size_t q = 0; q < summary_quantile_levels.size(); ++q)
        s.quantiles[q] = weighted_quantile(v, summary_quantile_levels[q]);
    if (space.is<Circle>()) unwrap_circle(v);
    split_clusters(v, cluster_floor_fraction * space.diameter(), s.clusters);
    if (space.is<Circle>())
        for (auto& c : s.clusters) c.center -= std::floor(c.center);
    std::stable_sort(s.clusters.begin(), s.clusters.end(), [](const Cluster& a, const Cluster& b) { return a.mass > b.mass; });
    if (s.clusters.size() >= 2) {
        if (space.is<Circle>()) {
            const double d = std::abs(s.clusters[0].center - s.clusters[1].center);
            s.separation = std::min(d, 1.0 - d);
        } else {
            s.separation = std::abs(s.clusters[0].center - s.clusters[1].center);
        }
    }
    return s;
}

}  // namespace detail

/// Empirical summary of a particle population (canonical projection).
inline IterateSummary summarize(const ParticlePopulation& pop) {
    if (pop.size() < 2) throw InvalidInput("summarize: population needs at least 2 points");
    const auto d = pop.dimension();
    std::vector<double> mean(d, 0.0);
    const double* x0 = pop.data();
    for (std::size_t i = 0; i < pop.size(); ++i)
        for (std::size_t c = 0; c < d; ++c) mean[c] += pop.data()[i * d + c] - x0[c];
    for (std::size_t c = 0; c < d; ++c) mean[c] = x0[c] + mean[c] / static_cast<double>(pop.size());
    auto v = detail::sorted_weighted(pop.projections(), std::vector<double>(pop.size(), 1.0));
    auto s = detail::summarize_weighted(std::move(v), std::move(mean), pop.generation(), pop.space());
    s.chain_steps = pop.lineage().chain_steps;
    if (pop.lineage().cap_reached) s.flags.emplace_back("t_cap_reached");
    return s;
}

/// Summary of an exact distribution on a finite space. Each atom is its own
/// cluster (centers are projections of the atoms).
inline IterateSummary summarize(const Distribution& theta, const Space& space, std::uint64_t generation) {
    const auto n = theta.size();
    if (space.finite_size() != n) throw InvalidInput("summarize: distribution does not match the space");
    std::vector<double> proj(n), mean;
    const auto* pc = std::get_if<PointCloud>(&space.variant());
    const bool coords = pc && !pc->table;
    mean.assign(coords ? pc->points.front().size() : 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double idx = static_cast<double>(i);
        proj[i] = space.projection(&idx);
        if (coords)
            for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += theta[i] * pc->points[i][c];
        else
            mean[0] += theta[i] * idx;
    }
    auto s = detail::summarize_weighted(detail::sorted_weighted(proj, theta.weights()), mean, generation, space);
    s.clusters.clear();
    for (std::size_t i = 0; i < n; ++i) {
        if (theta[i] <= 1e-15) continue;
        Cluster c;
        c.center = proj[i];
        c.mass = theta[i];
        c.count = i;  // atom index
        s.clusters.push_back(c);
    }
    std::stable_sort(s.clusters.begin(), s.clusters.end(), [](const Cluster& a, const Cluster& b) { return a.mass > b.mass; });
    s.separation.reset();
    if (s.clusters.size() >= 2) {
        const double a = static_cast<double>(s.clusters[0].count), b = static_cast<double>(s.clusters[1].count);
        s.separation = space.is<FiniteRank>() ? std::abs(a - b) : space.distance_unchecked(&a, &b);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Limit classification
// ---------------------------------------------------------------------------

enum class LimitKind { one_point, two_point, undecided };

inline const char* to_string(LimitKind k) noexcept {
    switch (k) {
        case LimitKind::one_point: return "one_point";
        case LimitKind::two_point: return "two_point";
        default: return "undecided";
    }
}

struct LimitThresholds {
    double one_point_mass = 0.999;
    double two_point_mass = 0.45;
};

struct LimitClassification {
    LimitKind kind = LimitKind::undecided;
    std::vector<double> locations;  // cluster centers (projection values)
    std::vector<double> masses;
    LimitThresholds thresholds;
    std::optional<bool> masses_equalizing;  // two_point: heavier mass moving toward 1/2
    bool contracting = false;               // within-cluster spread shrinking over the tail
};

inline LimitKind kind_of(const IterateSummary& s, const LimitThresholds& th = {}) {
    if (!s.clusters.empty() && s.clusters[0].mass >= th.one_point_mass) return LimitKind::one_point;
    if (s.clusters.size() >= 2 && s.clusters[0].mass >= th.two_point_mass && s.clusters[1].mass >= th.two_point_mass)
        return LimitKind::two_point;
    return LimitKind::undecided;
}

/// Classifies the apparent limit of a trajectory from its final iterate.
inline LimitClassification classify_limit(const std::vector<IterateSummary>& trajectory, const LimitThresholds& th = {}) {
    if (trajectory.size() < 3) throw InvalidInput("classify_limit: need at least 3 iterates");
    const auto& last = trajectory.back();
    LimitClassification out;
    out.thresholds = th;
    out.kind = kind_of(last, th);
    const std::size_t keep = out.kind == LimitKind::one_point ? 1 : out.kind == LimitKind::two_point ? 2 : last.clusters.size();
    for (std::size_t i = 0; i < keep && i < last.clusters.size(); ++i) {
        out.locations.push_back(last.clusters[i].center);
        out.masses.push_back(last.clusters[i].mass);
    }
    if (out.kind == LimitKind::two_point) {
        const auto& prev = trajectory[trajectory.size() - 3];
        if (prev.clusters.size() >= 2) out.masses_equalizing = std::abs(last.clusters[0].mass - 0.5) <= std::abs(prev.clusters[0].mass - 0.5);
    }
    const auto& early = trajectory[trajectory.size() - 3];
    auto spread = [](const IterateSummary& s) {
        double acc = 0.0;
        for (const auto& c : s.clusters) acc = std::max(acc, c.sd);
        return acc;
    };
    out.contracting = spread(last) < spread(early) || spread(last) == 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Geometric decay and scaling limits
// ---------------------------------------------------------------------------

struct DecayFit {
    double c_fit = 0.0;
    double r_squared = 0.0;
    std::size_t burn_in = 0;
};

inline constexpr double decay_min_r_squared = 0.99;

/// Least-squares fit of log(sd_n) = a + n log(c) over n >= burn_in.
/// Returns nullopt when fewer than 4 points remain or r^2 < 0.99, unless forced.
inline std::optional<DecayFit> fit_decay(const std::vector<double>& sd, std::size_t burn_in, bool force = false) {
    if (sd.size() <= burn_in + 3) throw InvalidInput("fit_decay: need more than burn_in + 3 values");
    std::vector<double> xs, ys;
    for (std::size_t i = burn_in; i < sd.size(); ++i) {
        if (!(sd[i] > 0.0)) throw InvalidInput("fit_decay: nonpositive sd in the fit window");
        xs.push_back(static_cast<double>(i));
        ys.push_back(std::log(sd[i]));
    }
    const auto n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    DecayFit fit;
    fit.burn_in = burn_in;
    const double slope = sxy / sxx;
    fit.c_fit = std::exp(slope);
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    if (!force && (xs.size() < 4 || fit.r_squared < decay_min_r_squared)) return std::nullopt;
    return fit;
}

/// (x - mean)/sd of the canonical projection.
inline std::vector<double> renormalize(const std::vector<double>& values) {
    if (values.size() < 2) throw InvalidInput("renormalize: need at least 2 values");
    const double n = static_cast<double>(values.size());
    const double x0 = values.front();
    double shifted = 0.0;
    for (double v : values) shifted += v - x0;
    const double mean = x0 + shifted / n;
    double ss = 0.0;
    for (double v : values) ss += (v - x0 - shifted / n) * (v - x0 - shifted / n);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) throw InvalidInput("renormalize: degenerate population (sd = 0)");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mean) / sd;
    return out;
}

inline std::vector<double> renormalize(const ParticlePopulation& pop) { return renormalize(pop.projections()); }

// ---------------------------------------------------------------------------
// Distances between empirical laws
// ---------------------------------------------------------------------------

// Both inputs sorted. Sizes may differ: the larger is thinned to evenly spaced ranks.
inline double wasserstein_1d_sorted(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw InvalidInput("wasserstein_1d: empty input");
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    const auto n = small.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = small.size() == large.size() ? i
                                                    : static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                                                               static_cast<double>(large.size()) / static_cast<double>(n));
        acc += std::abs(small[i] - large[std::min(r, large.size() - 1)]);
    }
    return acc / static_cast<double>(n);
}

inline double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return wasserstein_1d_sorted(a, b);
}

inline double wasserstein_1d(const ParticlePopulation& a, const ParticlePopulation& b) {
    return wasserstein_1d(a.projections(), b.projections());
}

// ---------------------------------------------------------------------------
// Circle density peaks
// ---------------------------------------------------------------------------

inline constexpr std::size_t kde_grid_points = 1024;
inline constexpr double peak_level_factor = 1.1;
inline constexpr double peak_prominence_fraction = 0.1;

// Silverman's rule on arc positions unwrapped at the largest gap.
inline double silverman_bandwidth_circle(const std::vector<double>& arcs) {
    detail::WeightedValues v = detail::sorted_weighted(arcs, std::vector<double>(arcs.size(), 1.0));
    detail::unwrap_circle(v);
    const double n = static_cast<double>(v.x.size());
    double mean = 0.0;
    for (double x : v.x) mean += x / n;
    double ss = 0.0;
    for (double x : v.x) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    const double iqr = detail::weighted_quantile(v, 0.75) - detail::weighted_quantile(v, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1e-3;
    return 0.9 * spread * std::pow(n, -0.2);
}

/// Wrapped-Gaussian KDE of arc positions on a uniform grid of [0,1).
inline std::vector<double> circle_kde(const std::vector<double>& arcs, double bandwidth, std::size_t grid = kde_grid_points) {
    if (arcs.empty()) throw InvalidInput("circle_kde: empty input");
    if (!(bandwidth > 0.0)) throw InvalidInput("circle_kde: bandwidth must be positive");
    std::vector<double> hist(grid, 0.0);
    for (double x : arcs) {
        auto b = static_cast<std::size_t>((x - std::floor(x)) * static_cast<double>(grid));
        hist[std::min(b, grid - 1)] += 1.0;
    }
    const double cell = 1.0 / static_cast<double>(grid);
    std::vector<double> kernel(grid, 0.0);
    const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t o = 0; o < grid; ++o) {
        double acc = 0.0;
        const double base = static_cast<double>(o) * cell;
        for (int wrap = -3; wrap <= 3; ++wrap) {
            const double z = (base + wrap) / bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        kernel[o] = acc * norm;
    }
    std::vector<double> dens(grid, 0.0);
    const double n = static_cast<double>(arcs.size());
    for (std::size_t g = 0; g < grid; ++g) {
        if (hist[g] == 0.0) continue;
        const double w = hist[g] / n;
        for (std::size_t o = 0; o < grid; ++o) dens[(g + o) % grid] += w * kernel[o];
    }
    // Kernel is even: shifting by -o uses the same weights.
    std::vector<double> sym(grid, 0.0);
    for (std::size_t g = 0; g < grid; ++g) {
        if (hist[g] == 0.0) continue;
        const double w = hist[g] / n;
        for (std::size_t o = 1; o < grid; ++o) sym[(g + grid - o) % grid] += w * kernel[o];
        sym[g] += w * kernel[0];
    }
    for (std::size_t g = 0; g < grid; ++g) dens[g] = 0.5 * (dens[g] + sym[g]);
    return dens;
}

/// Strict local maxima of the wrapped KDE above 1.1 x the uniform density.
/// A maximum whose prominence is under 10% of its height is sampling noise
/// on the flank or top of a larger bump and is not counted.
inline std::size_t count_peaks(const std::vector<double>& arcs, std::optional<double> bandwidth = std::nullopt) {
    const double h = bandwidth.value_or(silverman_bandwidth_circle(arcs));
    const auto dens = circle_kde(arcs, h);
    const auto g = dens.size();
    const double floor = *std::min_element(dens.begin(), dens.end());
    // lowest point passed before reaching higher ground, walking in one direction
    auto saddle = [&](std::size_t i, bool right) {
        double low = dens[i];
        for (std::size_t step = 1; step < g; ++step) {
            const double d = dens[right ? (i + step) % g : (i + g - step) % g];
            if (d > dens[i]) return low;
            low = std::min(low, d);
        }
        return floor;
    };
    std::size_t peaks = 0;
    for (std::size_t i = 0; i < g; ++i) {
        const double prev = dens[(i + g - 1) % g], next = dens[(i + 1) % g];
        if (!(dens[i] > prev && dens[i] > next && dens[i] > peak_level_factor)) continue;
        const double prominence = dens[i] - std::max(saddle(i, false), saddle(i, true));
        if (prominence >= peak_prominence_fraction * dens[i]) ++peaks;
    }
    return peaks;
}

inline std::size_t count_peaks(const ParticlePopulation& pop, std::optional<double> bandwidth = std::nullopt) {
    if (!pop.space().is<Circle>()) throw InvalidInput("count_peaks: population is not on the circle");
    return count_peaks(pop.projections(), bandwidth);
}

}  // namespace jkmap

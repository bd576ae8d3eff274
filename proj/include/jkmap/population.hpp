#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "jkmap/error.hpp"
#include "jkmap/finite_types.hpp"
#include "jkmap/rng.hpp"
#include "jkmap/spaces.hpp"

namespace jkmap {

// ---------------------------------------------------------------------------
// Initial distributions
// ---------------------------------------------------------------------------

namespace initial {
struct UniformInterval {};
struct Tilted {};       // density 1/2 + u on [0,1]
struct MoreTilted {};   // density 2u on [0,1]
struct UniformCircle {};
struct CircleDisc {};   // density t + 1/2 on [0,1), discontinuous at 0
struct GaussianCube {   // density proportional to exp(-alpha |x|^2) on [0,1]^d
    double alpha = 1.0;
};
struct FiniteWeights {
    Distribution weights;
};
struct PointMass {
    std::vector<double> location;
};
struct TwoPointMass {
    std::vector<double> loc1, loc2;
};
struct DirichletRandom {  // weights ~ Dirichlet(1,...,1) on a finite space
    std::uint64_t seed = 0;
};
}  // namespace initial

using InitialDistributionSpec =
    std::variant<initial::UniformInterval, initial::Tilted, initial::MoreTilted, initial::UniformCircle, initial::CircleDisc,
                 initial::GaussianCube, initial::FiniteWeights, initial::PointMass, initial::TwoPointMass,
                 initial::DirichletRandom>;

inline std::string initial_name(const InitialDistributionSpec& spec) {
    static constexpr const char* names[] = {"uniform_interval", "tilted",       "more_tilted",    "uniform_circle",
                                            "circle_disc",      "gaussian_cube", "finite_weights", "point_mass",
                                            "two_point_mass",   "dirichlet_random"};
    return names[spec.index()];
}

// Inverse CDF of the density 1/2 + u on [0,1].
inline double tilted_quantile(double v) noexcept { return 0.5 * (-1.0 + std::sqrt(1.0 + 8.0 * v)); }
// Inverse CDF of the density 2u on [0,1].
inline double more_tilted_quantile(double v) noexcept { return std::sqrt(v); }

inline Distribution dirichlet_weights(std::size_t n, std::uint64_t seed) {
    Xoshiro256 rng(derive_seed(seed, stream::initial, 0, 0xD1C));
    std::vector<double> w(n);
    // Dirichlet(1,...,1): normalized standard exponentials.
    for (auto& v : w) v = -std::log1p(-rng.uniform());
    return Distribution::normalized(std::move(w));
}

// Weights on a finite space induced by a finite-compatible spec.
inline Distribution finite_initial_weights(const InitialDistributionSpec& spec, const Space& space) {
    if (!space.is_finite()) throw InvalidInput("finite_initial_weights needs a finite space");
    const auto n = space.finite_size();
    auto index_of = [&](const std::vector<double>& loc) {
        space.check_point(loc);
        return static_cast<std::size_t>(loc[0]);
    };
    if (const auto* fw = std::get_if<initial::FiniteWeights>(&spec)) {
        if (fw->weights.size() != n) throw InvalidInput("initial weights length does not match the space");
        return fw->weights;
    }
    if (const auto* pm = std::get_if<initial::PointMass>(&spec)) return Distribution::point_mass(n, index_of(pm->location));
    if (const auto* tp = std::get_if<initial::TwoPointMass>(&spec))
        return Distribution::two_point(n, index_of(tp->loc1), index_of(tp->loc2));
    if (const auto* dr = std::get_if<initial::DirichletRandom>(&spec)) return dirichlet_weights(n, dr->seed);
    throw InvalidInput("initial distribution '" + initial_name(spec) + "' is not defined on a finite space");
}

// ---------------------------------------------------------------------------
// Particle populations
// ---------------------------------------------------------------------------

struct SeedRecord {
    std::uint64_t master = 0;
    std::uint64_t generation = 0;
    std::size_t chain_steps = 0;  // T used to produce this population (0 for samples of theta_0)
    bool cap_reached = false;     // adaptive mixing hit T_cap
};

/// Empirical distribution: N points of a space, stored flat.
class ParticlePopulation {
public:
    ParticlePopulation() = default;

    ParticlePopulation(Space space, std::vector<double> coords, std::uint64_t generation = 0, SeedRecord lineage = {})
        : space_(std::move(space)), coords_(std::move(coords)), generation_(generation), lineage_(lineage) {
        const auto d = space_.point_dimension();
        if (coords_.empty() || coords_.size() % d != 0) throw InvalidInput("population must hold N >= 1 whole points");
    }

    const Space& space() const noexcept { return space_; }
    std::size_t size() const noexcept { return coords_.size() / space_.point_dimension(); }
    std::size_t dimension() const noexcept { return space_.point_dimension(); }
    std::span<const double> point(std::size_t i) const noexcept {
        return {coords_.data() + i * dimension(), dimension()};
    }
    const double* data() const noexcept { return coords_.data(); }
    const std::vector<double>& coords() const noexcept { return coords_; }
    std::vector<double>& mutable_coords() noexcept { return coords_; }

    std::uint64_t generation() const noexcept { return generation_; }
    const SeedRecord& lineage() const noexcept { return lineage_; }
    SeedRecord& lineage() noexcept { return lineage_; }

    std::vector<double> projections() const {
        std::vector<double> out(size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = space_.projection(coords_.data() + i * dimension());
        return out;
    }

    void validate() const {
        for (std::size_t i = 0; i < size(); ++i) space_.check_point(point(i));
    }

private:
    Space space_;
    std::vector<double> coords_;
    std::uint64_t generation_ = 0;
    SeedRecord lineage_;
};

namespace detail {

inline bool spec_fits(const InitialDistributionSpec& spec, const Space& space) {
    return std::visit(
        [&](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, initial::UniformInterval> || std::is_same_v<T, initial::Tilted> ||
                          std::is_same_v<T, initial::MoreTilted>)
                return space.is<Interval>();
            else if constexpr (std::is_same_v<T, initial::UniformCircle> || std::is_same_v<T, initial::CircleDisc>)
                return space.is<Circle>();
            else if constexpr (std::is_same_v<T, initial::GaussianCube>)
                return space.is<HypercubeWeighted>() && s.alpha > 0.0;
            else if constexpr (std::is_same_v<T, initial::FiniteWeights> || std::is_same_v<T, initial::DirichletRandom>)
                return space.is_finite();
            else
                return true;  // point masses: validated against the space below
        },
        spec);
}

}  // namespace detail

/// n i.i.d. draws from `spec`; particle i uses its own stream derived from
/// (seed, i), so the result does not depend on evaluation order.
inline ParticlePopulation sample_initial(const InitialDistributionSpec& spec, const Space& space, std::size_t n,
                                         std::uint64_t seed) {
    if (n == 0) throw InvalidInput("sample_initial: n must be positive");
    if (!detail::spec_fits(spec, space))
        throw InvalidInput("initial distribution '" + initial_name(spec) + "' is incompatible with space '" + space.name() + "'");
    const auto dim = space.point_dimension();
    std::vector<double> coords(n * dim);

    std::vector<double> cumulative;
    if (space.is_finite() && !std::holds_alternative<initial::PointMass>(spec) &&
        !std::holds_alternative<initial::TwoPointMass>(spec)) {
        const auto w = finite_initial_weights(spec, space);
        cumulative.resize(w.size());
        std::partial_sum(w.weights().begin(), w.weights().end(), cumulative.begin());
        cumulative.back() = 1.0;
    }
    if (const auto* pm = std::get_if<initial::PointMass>(&spec)) space.check_point(pm->location);
    if (const auto* tp = std::get_if<initial::TwoPointMass>(&spec)) {
        space.check_point(tp->loc1);
        space.check_point(tp->loc2);
    }

    for (std::size_t i = 0; i < n; ++i) {
        Xoshiro256 rng(derive_seed(seed, stream::initial, 0, i));
        double* out = coords.data() + i * dim;
        std::visit(
            [&](const auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, initial::UniformInterval> || std::is_same_v<T, initial::UniformCircle>) {
                    out[0] = rng.uniform();
                } else if constexpr (std::is_same_v<T, initial::Tilted> || std::is_same_v<T, initial::CircleDisc>) {
                    out[0] = tilted_quantile(rng.uniform());
                    if constexpr (std::is_same_v<T, initial::CircleDisc>)
                        if (out[0] >= 1.0) out[0] = std::nextafter(1.0, 0.0);
                } else if constexpr (std::is_same_v<T, initial::MoreTilted>) {
                    out[0] = more_tilted_quantile(rng.uniform());
                } else if constexpr (std::is_same_v<T, initial::GaussianCube>) {
                    // Rejection from the uniform cube.
                    while (true) {
                        double sq = 0.0;
                        for (std::size_t c = 0; c < dim; ++c) {
                            out[c] = rng.uniform();
                            sq += out[c] * out[c];
                        }
                        if (rng.uniform() < std::exp(-s.alpha * sq)) break;
                    }
                } else if constexpr (std::is_same_v<T, initial::PointMass>) {
                    std::copy(s.location.begin(), s.location.end(), out);
                } else if constexpr (std::is_same_v<T, initial::TwoPointMass>) {
                    const auto& loc = (rng() >> 63) ? s.loc2 : s.loc1;
                    std::copy(loc.begin(), loc.end(), out);
                } else {
                    const double u = rng.uniform();
                    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
                    out[0] = static_cast<double>(std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                                                       cumulative.size() - 1));
                }
            },
            spec);
    }
    SeedRecord lineage;
    lineage.master = seed;
    return ParticlePopulation(space, std::move(coords), 0, lineage);
}

}  // namespace jkmap

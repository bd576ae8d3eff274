#include <gtest/gtest.h>

#include <jkmap/jkmap.hpp>

#include <cmath>
#include <numeric>
#include <set>

using namespace jkmap;

namespace {

ParticlePopulation line(std::vector<double> xs) { return ParticlePopulation(Space::interval(), std::move(xs)); }

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

TEST(ChainStep, PointMassSourceStaysPut) {
    const auto src = line(std::vector<double>(50, 0.42));
    Xoshiro256 rng(1);
    for (int k = 2; k <= 6; ++k)
        for (int j = 1; j <= k; ++j) {
            std::vector<double> x = {0.9};
            EXPECT_EQ(chain_step(src, x, j, k, rng), std::vector<double>{0.42});
        }
}

TEST(ChainStep, FartherOfTwoFromHalfAndHalf) {
    std::vector<double> xs(1000, 0.0);
    std::fill(xs.begin() + 500, xs.end(), 1.0);
    const auto src = line(xs);
    Xoshiro256 rng(2);
    const int trials = 100000;
    int ones = 0;
    std::vector<double> x = {0.0};
    for (int t = 0; t < trials; ++t) ones += chain_step(src, x, 2, 2, rng)[0] == 1.0;
    EXPECT_NEAR(ones / static_cast<double>(trials), 0.75, 0.005);
}

TEST(ChainStep, CloserOfTwoOnCircle) {
    const auto src = sample_initial(initial::UniformCircle{}, Space::circle(), 100000, 3);
    Xoshiro256 rng(4);
    const int trials = 200000;
    double acc = 0.0;
    std::vector<double> x = {0.3};
    for (int t = 0; t < trials; ++t) acc += Space::circle().distance(x, chain_step(src, x, 1, 2, rng));
    // arc distance of a uniform point is U[0,1/2]; the min of two has mean 1/6, sd about 0.118
    EXPECT_NEAR(acc / trials, 1.0 / 6.0, 4.0 * 0.118 / std::sqrt(trials) + 0.001);
}

TEST(ChainStep, TiesBrokenUniformly) {
    // from 0.5, points 0.25 and 0.75 are equidistant
    const auto src = line({0.25, 0.75});
    Xoshiro256 rng(5);
    int left = 0, right = 0;
    std::vector<double> x = {0.5};
    for (int t = 0; t < 100000; ++t) (chain_step(src, x, 1, 2, rng)[0] == 0.25 ? left : right)++;
    EXPECT_NEAR(left / 1e5, 0.5, 0.005);
    EXPECT_EQ(left + right, 100000);
}

TEST(EstimatePi, PointMassPopulationUnchanged) {
    const auto src = line(std::vector<double>(1000, 0.25));
    for (const auto& policy : {MixingPolicy::fixed(5), MixingPolicy::bound(), MixingPolicy::adaptive()}) {
        const auto out = estimate_pi(src, 2, 4, policy, 7);
        EXPECT_EQ(out.coords(), src.coords());
        EXPECT_EQ(out.generation(), 1u);
    }
}

TEST(EstimatePi, TwoPointFractionMatchesBinomialMap) {
    const std::size_t n = 200000;
    std::vector<double> xs(n, 1.0);
    std::fill(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(0.3 * n), 0.0);
    const auto out = estimate_pi(line(xs), 1, 2, MixingPolicy::bound(), 8);
    const double frac = std::count(out.coords().begin(), out.coords().end(), 0.0) / static_cast<double>(n);
    const double p = binomial::map(0.3, 1, 2);
    EXPECT_NEAR(p, 0.15517, 1e-5);
    EXPECT_NEAR(frac, p, 5 * 3 * std::sqrt(p * (1 - p) / n));
}

TEST(EstimatePiProperty, SandwichOnHistogramBins) {
    const std::size_t n = 100000;
    const auto src = sample_initial(initial::Tilted{}, Space::interval(), n, 9);
    for (int j : {1, 4}) {
        const int k = 4;
        const auto out = estimate_pi(src, j, k, MixingPolicy::adaptive(), 10);
        std::vector<double> before(20, 0.0), after(20, 0.0);
        for (double v : src.coords()) before[std::min<std::size_t>(19, static_cast<std::size_t>(v * 20))] += 1.0 / n;
        for (double v : out.coords()) after[std::min<std::size_t>(19, static_cast<std::size_t>(v * 20))] += 1.0 / n;
        for (std::size_t b = 0; b < 20; ++b) {
            const double sigma = std::sqrt(after[b] * (1 - after[b]) / n);
            EXPECT_LE(after[b], k * before[b] + 3 * sigma) << "bin " << b;
            EXPECT_GE(after[b] + 3 * sigma, std::pow(before[b], k)) << "bin " << b;
        }
    }
}

TEST(EstimatePiProperty, OutputLandsOnSourcePoints) {
    for (const auto& space : {Space::interval(), Space::circle(), Space::hypercube(4, 0.7)}) {
        InitialDistributionSpec spec = initial::UniformInterval{};
        if (space.is<Circle>()) spec = initial::UniformCircle{};
        if (space.is<HypercubeWeighted>()) spec = initial::GaussianCube{1.0};
        const auto src = sample_initial(spec, space, 5000, 11);
        const auto out = estimate_pi(src, 2, 3, MixingPolicy::fixed(20), 12);
        const auto d = src.dimension();
        std::set<std::vector<double>> pool;
        for (std::size_t i = 0; i < src.size(); ++i) pool.emplace(src.point(i).begin(), src.point(i).end());
        for (std::size_t i = 0; i < out.size(); ++i)
            ASSERT_TRUE(pool.count(std::vector<double>(out.point(i).begin(), out.point(i).end()))) << space.name();
        EXPECT_EQ(out.dimension(), d);
    }
}

TEST(EstimatePiProperty, FiniteSpaceStaysOnIndices) {
    const auto s = Space::point_cloud(ninepoint_coordinates());
    const auto src = sample_initial(initial::DirichletRandom{3}, s, 20000, 13);
    const auto out = estimate_pi(src, 7, 10, MixingPolicy::fixed(30), 14);
    for (double v : out.coords()) {
        EXPECT_EQ(v, std::floor(v));
        EXPECT_LT(v, 9.0);
    }
}

TEST(EstimatePiProperty, DeterministicAcrossThreadCounts) {
    const auto src = sample_initial(initial::UniformInterval{}, Space::interval(), 20000, 15);
    MixingReport r1, r4;
    const auto a = estimate_pi(src, 1, 4, MixingPolicy::adaptive(), 16, &r1, 1);
    const auto b = estimate_pi(src, 1, 4, MixingPolicy::adaptive(), 16, &r4, 4);
    const auto c = estimate_pi(src, 1, 4, MixingPolicy::adaptive(), 16, nullptr, 3);
    EXPECT_EQ(a.coords(), b.coords());
    EXPECT_EQ(a.coords(), c.coords());
    EXPECT_EQ(r1.steps, r4.steps);
    EXPECT_EQ(r1.w1_trace, r4.w1_trace);
    const auto d = estimate_pi(src, 1, 4, MixingPolicy::adaptive(), 17, nullptr, 4);
    EXPECT_NE(a.coords(), d.coords());
}

TEST(EstimatePiProperty, ReflectionSymmetryKeepsMeanAtHalf) {
    // sigma_MC of an iterate mean is measured from independent replicates
    const std::size_t half = 20000;
    const int replicates = 8;
    for (int j = 1; j <= 3; ++j) {
        std::vector<std::vector<double>> means(3);
        for (int r = 0; r < replicates; ++r) {
            const auto base = sample_initial(initial::UniformInterval{}, Space::interval(), half, 100 + r).coords();
            std::vector<double> xs = base;
            for (double v : base) xs.push_back(1.0 - v);
            auto pop = line(xs);
            for (int it = 0; it < 3; ++it) {
                pop = estimate_pi(pop, j, 4, MixingPolicy::adaptive(), 200 + r);
                means[it].push_back(mean(pop.coords()));
            }
        }
        for (int it = 0; it < 3; ++it) {
            const double m = mean(means[it]);
            double var = 0.0;
            for (double v : means[it]) var += (v - m) * (v - m);
            const double sigma = std::sqrt(var / (replicates - 1) / replicates);
            EXPECT_NEAR(m, 0.5, 3 * sigma) << "j=" << j << " iteration " << it + 1;
            EXPECT_LT(sigma, 0.01);
        }
    }
}

TEST(Mixing, BoundStepsForTwo) {
    for (double eps : {1e-1, 1e-2, 1e-3, 1e-6})
        EXPECT_EQ(bound_steps(2, eps), static_cast<std::size_t>(2 * std::ceil(std::log(1 / eps) / std::log(2.0))));
    EXPECT_EQ(bound_steps(2, 1e-3), 20u);
    // k=4: rate 1 - 1/64
    EXPECT_EQ(bound_steps(4, 1e-3), static_cast<std::size_t>(2 * std::ceil(std::log(1e3) / -std::log(1 - 1.0 / 64))));
    EXPECT_EQ(MixingPolicy::bound().steps(2), 20u);
    EXPECT_EQ(MixingPolicy::adaptive().cap(4), bound_steps(4, 1e-3));
}

TEST(Mixing, PolicyValidation) {
    EXPECT_THROW(MixingPolicy::fixed(0).validate(), InvalidInput);
    EXPECT_THROW(MixingPolicy::bound(1.5).validate(), InvalidInput);
    EXPECT_THROW(MixingPolicy::adaptive(0.0).validate(), InvalidInput);
    EXPECT_THROW(MixingPolicy::adaptive(1e-4, 0).validate(), InvalidInput);
}

TEST(Mixing, CapReachedIsFlagged) {
    auto policy = MixingPolicy::adaptive(1e-12);
    policy.noise_floor = false;
    policy.t_cap = 16;
    const auto src = sample_initial(initial::UniformInterval{}, Space::interval(), 5000, 20);
    MixingReport rep;
    const auto out = estimate_pi(src, 1, 4, policy, 21, &rep);
    EXPECT_TRUE(rep.cap_reached);
    EXPECT_EQ(rep.steps, 16u);
    EXPECT_TRUE(out.lineage().cap_reached);
    EXPECT_TRUE(summarize(out).flags.size() > 0);
}

TEST(Mixing, FixedStepsHonoured) {
    const auto src = sample_initial(initial::UniformInterval{}, Space::interval(), 1000, 22);
    MixingReport rep;
    const auto out = estimate_pi(src, 1, 2, MixingPolicy::fixed(7), 23, &rep);
    EXPECT_EQ(rep.steps, 7u);
    EXPECT_EQ(out.lineage().chain_steps, 7u);
}

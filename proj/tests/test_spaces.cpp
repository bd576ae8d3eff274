#include <gtest/gtest.h>

#include <jkmap/jkmap.hpp>

#include <cmath>
#include <numeric>

using namespace jkmap;

namespace {

double dist(const Space& s, std::vector<double> x, std::vector<double> y) { return s.distance(x, y); }

std::vector<double> random_point(const Space& s, Xoshiro256& rng) {
    if (s.is_finite()) return {static_cast<double>(rng.below(s.finite_size()))};
    std::vector<double> p(s.point_dimension());
    for (auto& v : p) v = rng.uniform();
    return p;
}

double mean_of(const ParticlePopulation& p) {
    const auto& c = p.coords();
    return std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
}

}  // namespace

TEST(Distance, CircleWrapsAround) { EXPECT_NEAR(dist(Space::circle(), {0.1}, {0.9}), 0.2, 1e-15); }

TEST(Distance, IntervalAbsoluteDifference) { EXPECT_NEAR(dist(Space::interval(), {0.3}, {0.7}), 0.4, 1e-15); }

TEST(Distance, HypercubeGeometricWeights) {
    const auto s = Space::hypercube(10, 0.7);
    const double expected = 0.7 * (1.0 - std::pow(0.7, 10)) / 0.3;
    EXPECT_NEAR(dist(s, std::vector<double>(10, 0.0), std::vector<double>(10, 1.0)), expected, 1e-12);
    EXPECT_NEAR(expected, 2.2675, 1e-4);
}

TEST(Distance, RejectsBadPoints) {
    EXPECT_THROW(dist(Space::interval(), {1.5}, {0.2}), InvalidInput);
    EXPECT_THROW(dist(Space::circle(), {1.0}, {0.2}), InvalidInput);
    EXPECT_THROW(dist(Space::hypercube(3, 0.5), {0.1, 0.2}, {0.1, 0.2, 0.3}), InvalidInput);
    EXPECT_THROW(Space::hypercube(3, 1.0), InvalidInput);
    EXPECT_THROW(Space::hypercube(0, 0.5), InvalidInput);
}

TEST(Distance, TableValidatedEagerly) {
    Eigen::MatrixXd d(2, 2);
    d << 0, 1, 2, 0;
    EXPECT_THROW(Space::distance_table(d), InvalidInput);
    d << 0, 1, 1, 0.5;
    EXPECT_THROW(Space::distance_table(d), InvalidInput);
    d << 0, 0, 0, 0;
    EXPECT_THROW(Space::distance_table(d), InvalidInput);
}

TEST(DistanceProperty, SymmetryAndTriangleOnEveryVariant) {
    std::vector<Space> spaces = {Space::interval(), Space::circle(), Space::hypercube(10, 0.7), Space::hypercube(3, 0.9),
                                 Space::point_cloud(ninepoint_coordinates()), Space::distance_table(five_point_distances()),
                                 Space::distance_table(random_btl_space(6, 3))};
    Xoshiro256 rng(11);
    for (const auto& s : spaces) {
        for (int t = 0; t < 1000; ++t) {
            const auto x = random_point(s, rng), y = random_point(s, rng), z = random_point(s, rng);
            const double xy = s.distance(x, y), yx = s.distance(y, x);
            EXPECT_EQ(xy, yx) << s.name();
            EXPECT_GE(xy, 0.0);
            EXPECT_LE(xy, s.distance(x, z) + s.distance(z, y) + 1e-12) << s.name();
            EXPECT_EQ(s.distance(x, x), 0.0);
        }
    }
}

TEST(SampleInitial, UniformMean) {
    const std::size_t n = 500000;
    const auto p = sample_initial(initial::UniformInterval{}, Space::interval(), n, 1);
    EXPECT_NEAR(mean_of(p), 0.5, 3.0 / std::sqrt(12.0 * n));
}

TEST(SampleInitial, TiltedMean) {
    const auto p = sample_initial(initial::Tilted{}, Space::interval(), 500000, 2);
    EXPECT_NEAR(mean_of(p), 7.0 / 12.0, 0.002);
}

TEST(SampleInitial, MoreTiltedAndCircleDiscMeans) {
    // 2u has mean 2/3; t + 1/2 on [0,1) has mean 7/12
    EXPECT_NEAR(mean_of(sample_initial(initial::MoreTilted{}, Space::interval(), 200000, 3)), 2.0 / 3.0, 0.003);
    EXPECT_NEAR(mean_of(sample_initial(initial::CircleDisc{}, Space::circle(), 200000, 3)), 7.0 / 12.0, 0.003);
}

TEST(SampleInitial, PointMassIsConstant) {
    const auto p = sample_initial(initial::PointMass{{0.3}}, Space::interval(), 100, 4);
    for (double v : p.coords()) EXPECT_EQ(v, 0.3);
}

TEST(SampleInitial, GaussianCubeStaysInCubeAndLeansToOrigin) {
    const auto p = sample_initial(initial::GaussianCube{1.0}, Space::hypercube(10, 0.7), 20000, 5);
    p.validate();
    EXPECT_LT(mean_of(p), 0.5);
}

TEST(SampleInitial, FiniteWeightsFrequencies) {
    const auto s = Space::distance_table(five_point_distances());
    const auto p = sample_initial(initial::FiniteWeights{Distribution({0.1, 0.2, 0.3, 0.4, 0.0})}, s, 100000, 6);
    std::vector<double> freq(5, 0.0);
    for (double v : p.coords()) freq[static_cast<std::size_t>(v)] += 1e-5;
    EXPECT_NEAR(freq[0], 0.1, 0.005);
    EXPECT_NEAR(freq[3], 0.4, 0.005);
    EXPECT_EQ(freq[4], 0.0);
}

TEST(SampleInitial, Reproducible) {
    const auto a = sample_initial(initial::Tilted{}, Space::interval(), 1000, 9);
    const auto b = sample_initial(initial::Tilted{}, Space::interval(), 1000, 9);
    const auto c = sample_initial(initial::Tilted{}, Space::interval(), 1000, 10);
    EXPECT_EQ(a.coords(), b.coords());
    EXPECT_NE(a.coords(), c.coords());
}

TEST(SampleInitial, IncompatibleSpecRejected) {
    EXPECT_THROW(sample_initial(initial::UniformCircle{}, Space::interval(), 10, 1), InvalidInput);
    EXPECT_THROW(sample_initial(initial::Tilted{}, Space::hypercube(2, 0.5), 10, 1), InvalidInput);
    EXPECT_THROW(sample_initial(initial::PointMass{{2.0}}, Space::interval(), 10, 1), InvalidInput);
}

TEST(RankMatrix, FivePointRowOne) {
    const auto r = rank_matrix_from_distances(five_point_distances());
    EXPECT_EQ(r.rows()[0], (std::vector<int>{1, 4, 2, 3, 5}));
}

TEST(RankMatrix, TwoPoints) {
    Eigen::MatrixXd d(2, 2);
    d << 0, 0.37, 0.37, 0;
    EXPECT_EQ(rank_matrix_from_distances(d).rows(), (std::vector<std::vector<int>>{{1, 2}, {2, 1}}));
}

TEST(RankMatrix, FourPointsOnLine) {
    const auto s = Space::point_cloud({{0.0}, {0.4}, {0.6}, {1.0}});
    const auto r = rank_matrix_from_distances(s.distance_matrix());
    EXPECT_EQ(r.rows()[1], (std::vector<int>{3, 1, 2, 4}));
}

TEST(RankMatrix, TieNamesRowAndPair) {
    Eigen::MatrixXd d(3, 3);
    d << 0, 1, 1, 1, 0, 2, 1, 2, 0;
    try {
        (void)rank_matrix_from_distances(d);
        FAIL() << "no tie reported";
    } catch (const TieError& e) {
        EXPECT_EQ(e.row(), 0u);
        EXPECT_EQ(e.first(), 1u);
        EXPECT_EQ(e.second(), 2u);
    }
}

TEST(RankMatrixProperty, RowsArePermutationsWithUnitDiagonal) {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto r = rank_matrix_from_distances(random_btl_space(3 + seed % 6, seed));
        const auto rows = r.rows();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            EXPECT_EQ(rows[i][i], 1);
            auto sorted = rows[i];
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t m = 0; m < sorted.size(); ++m) EXPECT_EQ(sorted[m], static_cast<int>(m + 1));
        }
    }
}

TEST(RankMatrix, RejectsNonPermutationRows) {
    EXPECT_THROW(RankMatrix::from_rows({{1, 1}, {2, 1}}), InvalidInput);
    EXPECT_THROW(RankMatrix::from_rows({{2, 1}, {2, 1}}), InvalidInput);
}

TEST(Btl, StarTree) {
    BinaryTree t;
    t.leaves = 3;
    t.edges = {{0, 3, 0.6}, {1, 3, 0.9}, {2, 3, 1.3}};
    const auto d = t.leaf_distances();
    EXPECT_DOUBLE_EQ(d(0, 1), 1.5);
    EXPECT_DOUBLE_EQ(d(0, 2), 1.9);
    EXPECT_DOUBLE_EQ(d(1, 2), 2.2);
}

TEST(BtlProperty, FourPointConditionAndDistinctness) {
    for (std::size_t leaves = 3; leaves <= 8; ++leaves) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto d = random_btl_space(leaves, seed);
            EXPECT_FALSE(has_row_ties(d));
            const auto n = static_cast<Eigen::Index>(leaves);
            for (Eigen::Index w = 0; w < n; ++w)
                for (Eigen::Index x = w + 1; x < n; ++x)
                    for (Eigen::Index y = x + 1; y < n; ++y)
                        for (Eigen::Index z = y + 1; z < n; ++z) {
                            std::array<double, 3> s = {d(w, x) + d(y, z), d(w, y) + d(x, z), d(w, z) + d(x, y)};
                            std::sort(s.begin(), s.end());
                            EXPECT_NEAR(s[1], s[2], 1e-12);
                        }
        }
    }
}

TEST(Btl, Deterministic) {
    EXPECT_EQ(random_btl_space(7, 42), random_btl_space(7, 42));
    EXPECT_NE(random_btl_space(7, 42), random_btl_space(7, 43));
    EXPECT_THROW(random_btl_space(2, 1), InvalidInput);
}

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "flowalign/errors.hpp"
#include "flowalign/linalg.hpp"
#include "flowalign/rng.hpp"

using namespace flowalign;

TEST(Dot, HandValues) {
    EXPECT_EQ(dot(Vector{1, 0}, Vector{0, 1}), 0.0);
    EXPECT_EQ(dot(Vector{1, 2}, Vector{1, 2}), 5.0);
    EXPECT_EQ(dot(Vector{2, 3}, Vector{4, -1}), 5.0);
}

TEST(Dot, DimMismatchThrows) {
    EXPECT_THROW(dot(Vector{1, 2}, Vector{1, 2, 3}), DimError);
    EXPECT_THROW(squared_distance(Vector{1}, Vector{1, 2}), DimError);
}

TEST(Cosine, HandValues) {
    EXPECT_DOUBLE_EQ(cosine(Vector{0.3, -2, 5}, Vector{0.3, -2, 5}), 1.0);
    EXPECT_DOUBLE_EQ(cosine(Vector{0.3, -2, 5}, Vector{-0.3, 2, -5}), -1.0);
    EXPECT_NEAR(cosine(Vector{1, 0}, Vector{1, 1}), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Cosine, ZeroNormThrows) {
    EXPECT_THROW(cosine(Vector{0, 0}, Vector{1, 0}), ZeroNormError);
    EXPECT_THROW(normalized(Vector{0, 0, 0}), ZeroNormError);
}

TEST(Cosine, StaysInRange) {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        Vector a(7), b(7);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();
        const double c = cosine(a, b);
        EXPECT_LE(c, 1.0);
        EXPECT_GE(c, -1.0);
        EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
    }
}

TEST(Linalg, NormDistanceAxpy) {
    EXPECT_DOUBLE_EQ(norm(Vector{3, 4}), 5.0);
    EXPECT_DOUBLE_EQ(distance(Vector{1, 1}, Vector{4, 5}), 5.0);
    Vector y{1, 1};
    axpy(2.0, Vector{1, -1}.values(), y.values());
    EXPECT_EQ(y, (Vector{3, -1}));
    EXPECT_NEAR(norm(normalized(Vector{2, -7, 1})), 1.0, 1e-15);
    EXPECT_EQ((Vector{1, 2} + Vector{3, 4}), (Vector{4, 6}));
    EXPECT_EQ((2.0 * Vector{1, 2} - Vector{1, 1}), (Vector{1, 3}));
}

TEST(Linalg, AllFinite) {
    EXPECT_TRUE(all_finite(Vector{1, 2}.values()));
    EXPECT_FALSE(all_finite(Vector{1, std::numeric_limits<double>::quiet_NaN()}.values()));
    EXPECT_FALSE(all_finite(Vector{std::numeric_limits<double>::infinity()}.values()));
}

TEST(Gauss, ZeroStdIsMeanWithoutDraw) {
    Rng rng(1);
    EXPECT_EQ(gauss(rng, 3.5, 0.0), 3.5);
    EXPECT_EQ(rng.counter(), 0u);
    EXPECT_THROW(gauss(rng, 0.0, -1.0), ArgError);
}

TEST(Gauss, SeedDeterminism) {
    Rng a(42), b(42);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(gauss(a, 1.0, 2.0), gauss(b, 1.0, 2.0));
    Rng c(42), d(43);
    EXPECT_NE(gauss(c, 0.0, 1.0), gauss(d, 0.0, 1.0));
}

TEST(Gauss, MomentsOfManyDraws) {
    Rng rng(2024);
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = gauss(rng, 0.0, 1.0);
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum_sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.02);
    EXPECT_NEAR(sd, 1.0, 0.02);
}

TEST(Rng, UniformRangeAndIndex) {
    Rng rng(9);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 50000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ++hits[rng.uniform_index(5)];
    }
    // binomial sd is about 89; 5 sd band
    for (int h : hits) EXPECT_NEAR(h, 10000, 450);
    EXPECT_THROW(rng.uniform_index(0), ArgError);
}

TEST(Rng, SplitStreamsDiffer) {
    Rng parent(5);
    Rng a = parent.split();
    Rng b = parent.split();
    EXPECT_NE(a.next_u64(), b.next_u64());
}

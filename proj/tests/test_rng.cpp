#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <vector>

#include "edbl/rng.hpp"

using namespace edbl;

TEST_CASE("Beta(1,1) behaves as Uniform(0,1)") {
    Rng rng(12345);
    const int n = 100000;
    std::vector<double> draws(n);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        draws[i] = sample_beta(rng, 1.0, 1.0);
        mean += draws[i];
    }
    mean /= n;
    CHECK(std::abs(mean - 0.5) < 0.01);

    // Kolmogorov-Smirnov distance against the uniform CDF.
    std::sort(draws.begin(), draws.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double lo = std::abs(draws[i] - static_cast<double>(i) / n);
        const double hi = std::abs(draws[i] - static_cast<double>(i + 1) / n);
        ks = std::max(ks, std::max(lo, hi));
    }
    CHECK(ks < 0.01);
}

TEST_CASE("fixed seed repeats the draw sequence") {
    Rng a(99);
    Rng b(99);
    for (int i = 0; i < 10; ++i) {
        CHECK(sample_beta(a, 1.0, 1.0) == sample_beta(b, 1.0, 1.0));
    }
    Rng c(99);
    Rng d(99);
    for (int i = 0; i < 10; ++i) {
        CHECK(sample_beta(c, 2.5, 0.7) == sample_beta(d, 2.5, 0.7));
    }
}

TEST_CASE("general beta draws stay in range and track the analytic mean") {
    Rng rng(5);
    const int n = 50000;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_beta(rng, 2.0, 5.0);
        CHECK(x >= 0.0);
        CHECK(x <= 1.0);
        mean += x;
    }
    mean /= n;
    CHECK(std::abs(mean - 2.0 / 7.0) < 0.01);
}

TEST_CASE("beta rejects non-positive shapes") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_beta(rng, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(sample_beta(rng, 1.0, -2.0), std::domain_error);
}

TEST_CASE("equal seeds give bit-identical matrices") {
    Rng a(2024);
    Rng b(2024);
    const Matrix ma = gaussian_matrix(7, 5, 1.3, a);
    const Matrix mb = gaussian_matrix(7, 5, 1.3, b);
    CHECK(ma.values() == mb.values());
}

TEST_CASE("uniform_index covers the range without bias artifacts") {
    Rng rng(8);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) ++counts[rng.uniform_index(5)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
    CHECK_THROWS_AS(rng.uniform_index(0), std::domain_error);
}

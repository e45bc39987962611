#include "edbl/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace edbl {

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - uniform() lies in (0, 1], keeping the log argument positive.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) throw std::domain_error("Rng::uniform_index: empty range");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

namespace {

// Marsaglia-Tsang gamma sampler; shapes below one are boosted to shape+1.
double sample_gamma(Rng& rng, double shape) {
    if (shape < 1.0) {
        double u = rng.uniform();
        if (u <= 0.0) u = std::numeric_limits<double>::min();
        return sample_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x;
        double v;
        do {
            x = rng.gaussian();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = rng.uniform();
        if (u <= 0.0) u = std::numeric_limits<double>::min();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

}  // namespace

double sample_beta(Rng& rng, double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw std::domain_error("sample_beta: shapes must be positive");
    if (a == 1.0 && b == 1.0) return rng.uniform();
    const double ga = sample_gamma(rng, a);
    const double gb = sample_gamma(rng, b);
    const double sum = ga + gb;
    if (sum <= 0.0) return 0.5;
    return ga / sum;
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = stddev * rng.gaussian();
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace edbl

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "edbl/matrix.hpp"

namespace edbl {

// Deterministic random source. All transforms (uniform, gaussian, beta,
// index draws) are implemented on top of the mt19937_64 word stream so an
// equal seed yields an identical draw sequence on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller, second draw cached.
    double gaussian();

    // Uniform integer in [0, n), rejection sampled to avoid modulo bias.
    std::size_t uniform_index(std::size_t n);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Draw from Beta(a, b). Beta(1, 1) is a single uniform draw; other shapes
// go through a gamma-ratio construction.
double sample_beta(Rng& rng, double a, double b);

// Matrix of independent N(0, stddev^2) entries, filled row-major.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

// In-place Fisher-Yates shuffle driven by the given Rng.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
        const std::size_t j = rng.uniform_index(i + 1);
        std::swap(items[i], items[j]);
    }
}

// 64-bit mixing for deriving independent sub-seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace edbl

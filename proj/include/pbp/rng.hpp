#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace pbp {

// Recorded in output metadata so runs can be tied to the generator that
// produced them.
inline constexpr const char* kGeneratorName = "mt19937_64";

// Deterministic RNG. The distributions are built directly on the raw engine
// output instead of <random>'s distribution classes, whose results differ
// between standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform draw in (0, 1).
    double uniform01() {
        for (;;) {
            const double u = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
            if (u > 0.0) return u;
        }
    }

    // Index drawn proportionally to a nonnegative weight vector.
    int categorical(std::span<const double> weights);

    // Uniform draw from the k-simplex (symmetric Dirichlet with alpha = 1).
    std::vector<double> simplex_uniform(int k);

private:
    std::mt19937_64 eng_;
};

// Derives an independent child seed for stream `stream` (EM restarts,
// per-cell experiment datasets).
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pbp

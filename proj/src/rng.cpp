#include "pbp/rng.hpp"

#include <cmath>

#include "pbp/errors.hpp"

namespace pbp {

int Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw validation_error("categorical: negative weight");
        total += w;
    }
    if (total <= 0.0) throw validation_error("categorical: zero total weight");
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u <= acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
}

std::vector<double> Rng::simplex_uniform(int k) {
    if (k < 1) throw validation_error("simplex_uniform: k < 1");
    std::vector<double> v(static_cast<std::size_t>(k));
    double total = 0.0;
    for (auto& x : v) {
        x = -std::log(uniform01());
        total += x;
    }
    for (auto& x : v) x /= total;
    return v;
}

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 step on a stream-salted state.
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace pbp

#include "hsnct/random.hpp"

#include <cmath>

namespace hsnct {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t key) noexcept
    : state_(splitmix64(splitmix64(seed) ^ key)) {}

CounterRng CounterRng::for_index(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                 std::uint64_t d) noexcept {
    std::uint64_t key = splitmix64(a);
    key = splitmix64(key ^ b);
    key = splitmix64(key ^ c);
    key = splitmix64(key ^ d);
    return CounterRng(seed, key);
}

std::uint64_t CounterRng::next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

double CounterRng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::poisson(double mean) noexcept {
    if (!(mean > 0.0)) {
        return 0;
    }
    if (mean < 10.0) {
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = uniform_open_low();
        while (prod > limit) {
            ++k;
            prod *= uniform_open_low();
        }
        return k;
    }

    // PTRS, W. Hormann, "The transformed rejection method for generating
    // Poisson random variables", Insurance: Mathematics and Economics 12 (1993).
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) {
            return static_cast<std::uint64_t>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -mean + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::uint64_t>(k);
        }
    }
}

}  // namespace hsnct

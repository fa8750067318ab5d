#pragma once

#include <cstdint>

namespace hsnct {

/// Counter-based generator: the stream is a pure function of (seed, key), so
/// samples can be drawn in any order or on any thread with identical results.
/// Uses the SplitMix64 finalizer for both keying and stepping.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t key) noexcept;
    static CounterRng for_index(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                                std::uint64_t d = 0) noexcept;

    std::uint64_t next_u64() noexcept;
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform on (0, 1].
    double uniform_open_low() noexcept { return 1.0 - uniform(); }
    /// Poisson variate. Knuth's product method below mean 10, Hormann's PTRS
    /// transformed rejection above. Platform independent given libm.
    std::uint64_t poisson(double mean) noexcept;

private:
    std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace hsnct

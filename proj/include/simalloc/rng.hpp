#pragma once

#include <cstdint>
#include <string_view>

namespace simalloc {

// SplitMix64 (Steele, Lea, Flood 2014). Every generated trace names it in its
// header so other implementations can reproduce the record stream.
class SplitMix64 {
public:
    static constexpr std::string_view kName = "splitmix64";

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform();

    /// Uniform integer in [lo, hi] (inclusive), via 128-bit multiply-shift.
    std::uint64_t range(std::uint64_t lo, std::uint64_t hi);

    /// Independent stream `index` derived from `seed`. Stream i is seeded with
    /// mix(seed + (i + 1) * golden_gamma), so streams never share a state.
    static SplitMix64 stream(std::uint64_t seed, std::uint64_t index);

    static std::uint64_t mix(std::uint64_t z);

private:
    std::uint64_t state_;
};

}  // namespace simalloc

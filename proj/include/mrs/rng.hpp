#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mrs {

/// Independent random streams of one run.
enum class Stream : std::uint32_t {
    Arrivals = 1,
    Churn = 2,
    Jitter = 3,
    Faults = 4,
};

/// Seeded generator for one purpose. The engine is std::mt19937_64 seeded by
/// std::seed_seq{seed_lo, seed_hi, stream}; both are fully specified by the
/// standard, and the mappings below avoid the implementation-defined
/// std::*_distribution classes, so sequences match across platforms.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, Stream stream);

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform01();
    /// Uniform in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);
    /// Uniform in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

}  // namespace mrs

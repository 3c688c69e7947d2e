#include "mrs/rng.hpp"

#include <limits>
#include <stdexcept>

namespace mrs {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, Stream stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, Stream stream) : engine_(make_engine(seed, stream)) {}

double RandomStream::uniform01()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::below(std::uint64_t n)
{
    if (n == 0) throw std::invalid_argument("RandomStream::below(0)");
    // Rejection sampling keeps the result exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

std::int64_t RandomStream::between(std::int64_t lo, std::int64_t hi)
{
    if (hi < lo) throw std::invalid_argument("RandomStream::between: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
    return lo + static_cast<std::int64_t>(below(span));
}

}  // namespace mrs

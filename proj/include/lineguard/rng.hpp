#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace lineguard::detail {

// mt19937_64 is fully specified by the standard; pairing it with these two
// reductions keeps every seeded stream reproducible across platforms.

/// Uniform draw on [0, n) via rejection sampling.
inline std::uint64_t bounded_uniform(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    for (;;) {
        const std::uint64_t v = gen();
        if (v < limit) return v % n;
    }
}

/// Uniform double on [0, 1) with 53 random bits.
inline double unit_uniform(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace lineguard::detail

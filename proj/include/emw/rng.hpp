// rng.hpp — counter-based deterministic random streams (splitmix64 mixing).
// Every draw is a pure function of (seed, stream, counter), so any sample,
// tensor, or shuffle can be reproduced in isolation.
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace emw {

struct CounterRng {
    std::uint64_t seed = 0;

    explicit CounterRng(std::uint64_t s) : seed(s) {}

    static std::uint64_t mix(std::uint64_t z);

    // raw 64-bit value for (stream, counter)
    std::uint64_t raw(std::uint64_t stream, std::uint64_t counter) const;

    // uniform double in [0, 1)
    double unit(std::uint64_t stream, std::uint64_t counter) const;

    // standard normal via Box-Muller on two counters (2*counter, 2*counter+1)
    double normal(std::uint64_t stream, std::uint64_t counter) const;

    // stable stream id from a label (e.g. a tensor name)
    static std::uint64_t stream_of(std::string_view label);

    // deterministic Fisher-Yates shuffle of 0..n-1 under one stream
    std::vector<int> permutation(std::uint64_t stream, int n) const;
};

}  // namespace emw

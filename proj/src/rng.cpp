#include "emw/rng.hpp"

#include <cmath>
#include <numeric>

namespace emw {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kStreamSalt = 0xd1b54a32d192ed03ull;
}  // namespace

std::uint64_t CounterRng::mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

std::uint64_t CounterRng::raw(std::uint64_t stream, std::uint64_t counter) const {
    const std::uint64_t a = mix(seed + kGolden * (stream + 1));
    return mix(a ^ (kStreamSalt * (counter + 1)));
}

double CounterRng::unit(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(raw(stream, counter) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t counter) const {
    // Box-Muller; counter pair keeps the draw addressable
    const double u1 = unit(stream, 2 * counter);
    const double u2 = unit(stream, 2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * M_PI * u2);
}

std::uint64_t CounterRng::stream_of(std::string_view label) {
    // FNV-1a 64
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<int> CounterRng::permutation(std::uint64_t stream, int n) const {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(raw(stream, static_cast<std::uint64_t>(i)) %
                                        static_cast<std::uint64_t>(i + 1));
        std::swap(p[i], p[j]);
    }
    return p;
}

}  // namespace emw

#pragma once

#include <cmath>
#include <cstdint>

namespace stamina {

// Counter-based generator: every draw is a pure function of
// (seed, stream, counter), so any sample in a run can be reproduced
// without replaying the ones before it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() { return hash(seed_, stream_, counter_++); }

    // Uniform in (0, 1); never returns exactly 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    // Box-Muller, one value per call (the pair's second half is discarded
    // to keep draws independent of call parity).
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform())); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    static std::uint64_t hash(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
        // splitmix64 over a mixed key
        std::uint64_t x = seed;
        x ^= stream * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL;
        x ^= counter * 0xbf58476d1ce4e5b9ULL + 0x94d049bbULL;
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

// Distinct stream ids from small tags, e.g. (layer, step, purpose).
inline std::uint64_t stream_id(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    return a * 0x100000001b3ULL ^ b * 0x1000193ULL ^ c;
}

}  // namespace stamina

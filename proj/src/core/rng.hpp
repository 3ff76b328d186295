#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace superspill {

// Counter-based generator: every draw is a pure hash of (seed, stream, counter),
// so per-firm streams do not depend on evaluation order or thread scheduling.
// Mixing is SplitMix64 applied to the combined key.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL) ^ mix(stream + 0x632be59bd9b4e019ULL)) {}

    // Stream id from a string key (firm ids are strings). FNV-1a.
    static std::uint64_t stream_of(const std::string& key) {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : key) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::uint64_t next_u64() { return mix(state_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    double next_uniform() {  // in [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_normal() {  // Box-Muller, one value per call
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = next_uniform();
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    std::uint64_t counter_ = 0;
};

}  // namespace superspill

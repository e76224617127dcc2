#pragma once

#include <cstdint>

namespace ddspec {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent substream key. Composable: derive per index level,
// e.g. derive_stream(derive_stream(seed, point), shot).
inline std::uint64_t derive_stream(std::uint64_t key, std::uint64_t index) {
    return mix64(key ^ (0x632be59bd9b4e019ULL + index * 0x9e3779b97f4a7c15ULL));
}

// Counter-based generator: the i-th output depends only on (key, i), so a
// fixed key yields the same draws under any evaluation order or thread count.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key), counter_(0) {}

    std::uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    // [0, 1) with 53-bit resolution
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // [0, 2 pi)
    double next_angle() { return next_double() * 6.283185307179586; }

  private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace ddspec

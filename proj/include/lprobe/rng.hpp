#pragma once

#include <cstdint>

namespace lprobe {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based 64-bit generator: draw k of stream `key` is
/// mix64(key + k * 0x9e3779b97f4a7c15). Output depends only on (key, k), so
/// any implementation of the same two lines reproduces every selection.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t next() noexcept {
        return mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL);
    }

    // Uniform in [0, bound) by rejection of the biased low range. bound > 0.
    constexpr std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (true) {
            const std::uint64_t r = next();
            if (r >= threshold) {
                return r % bound;
            }
        }
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Stream key for (seed, class index, purpose). Class streams are independent
// of the order in which classes are visited.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t class_index,
                                   std::uint64_t purpose) noexcept {
    return mix64(seed ^ mix64(class_index * 0xd1b54a32d192ed03ULL + purpose));
}

}  // namespace lprobe

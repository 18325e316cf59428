#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace amc {

/// SplitMix64 finalizer; used as the splittable hash for every derived seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) noexcept {
    return mix64(parent ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Stream tags keep the per-purpose draws of one record independent.
enum class Stream : std::uint64_t {
    Bits = 1,
    Message = 2,
    Channel = 3,
    Noise = 4,
    Shuffle = 5,
    Split = 6,
    Dropout = 7,
    NoiseLayer = 8,
    Init = 9,
};

constexpr std::uint64_t derive_seed(std::uint64_t parent, Stream s) noexcept {
    return derive_seed(parent, static_cast<std::uint64_t>(s));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) { return Engine{mix64(seed)}; }

/// 64-bit FNV-1a, for config and file fingerprints.
constexpr std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace amc

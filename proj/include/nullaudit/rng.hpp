#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace nullaudit::rng {

// SplitMix64 finalizer. Used both to seed generators and to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive combination of stream coordinates.
constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) noexcept {
    return mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
}

template <typename... Ts>
constexpr std::uint64_t derive(std::uint64_t master, Ts... parts) noexcept {
    std::uint64_t h = mix64(master);
    ((h = combine(h, static_cast<std::uint64_t>(parts))), ...);
    return h;
}

// Stable 64-bit FNV-1a, for turning labels into stream coordinates.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256++; one instance per stream, seeded through SplitMix64.
class Xoshiro256pp {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256pp(std::uint64_t seed) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        for (auto& w : s_) {
            seed += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = seed;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            w = z ^ (z >> 31);
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// A stream bundles an engine with the distributions we actually draw from.
class Stream {
public:
    explicit Stream(std::uint64_t key) : eng_(key) {}

    double normal() { return normal_(eng_); }
    double uniform() { return unif_(eng_); }
    std::uint64_t bits() { return eng_(); }
    Xoshiro256pp& engine() { return eng_; }

private:
    Xoshiro256pp eng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

// Fill out[0..n) with independent +/-1 values, 64 per engine call.
void fill_rademacher(Stream& s, double* out, std::size_t n);

}  // namespace nullaudit::rng

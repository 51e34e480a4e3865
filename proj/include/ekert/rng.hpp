#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace ekert {

// splitmix64, used for seed expansion and derivation only.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

// xoshiro256** (Blackman/Vigna, public domain). Satisfies
// uniform_random_bit_generator so the std distributions accept it.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : state_) w = sm.next();
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_;
};

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Named sub-stream derivation: every consumer of randomness hangs off the
// master seed under its own name, so adding a consumer never perturbs the
// draws seen by existing ones.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) {
    SplitMix64 sm(master ^ fnv1a64(name));
    sm.next();
    return sm.next();
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t index) {
    SplitMix64 sm(derive_seed(master, name) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    sm.next();
    return sm.next();
}

// A named sub-stream that hands out one independent engine per index
// (per collection window, per sweep point, ...). Indexed derivation keeps
// the draw sequence identical whether windows run serially or in parallel.
class SeedStream {
public:
    SeedStream(std::uint64_t master, std::string_view name)
        : base_(derive_seed(master, name)) {}

    Xoshiro256 at(std::uint64_t index) const { return Xoshiro256(seed_at(index)); }

    std::uint64_t seed_at(std::uint64_t index) const {
        SplitMix64 sm(base_ ^ (0xd1342543de82ef95ull * (index + 1)));
        sm.next();
        return sm.next();
    }

    Xoshiro256 engine() const { return at(0); }

private:
    std::uint64_t base_;
};

template <class Rng>
double uniform01(Rng& rng) {
    return (rng() >> 11) * 0x1.0p-53;
}

}  // namespace ekert

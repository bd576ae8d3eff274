#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace jkmap {

// SplitMix64, used only to expand seeds into generator state.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes a master seed with stream coordinates into an independent sub-seed.
// Streams are addressed by (purpose, generation, index) so that results do
// not depend on how work is split across threads.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                    std::uint64_t generation = 0, std::uint64_t index = 0) noexcept {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s = h ^ (purpose * 0xd1b54a32d192ed03ULL);
    h = splitmix64(s);
    s = h ^ (generation * 0xaef17502108ef2d9ULL);
    h = splitmix64(s);
    s = h ^ (index * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

namespace stream {
inline constexpr std::uint64_t initial = 1;
inline constexpr std::uint64_t chain = 2;
inline constexpr std::uint64_t thinning = 3;
inline constexpr std::uint64_t restarts = 4;
inline constexpr std::uint64_t jitter = 5;
}  // namespace stream

// xoshiro256** 1.0. Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit constexpr Xoshiro256(std::uint64_t seed = 0) noexcept {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0,1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform on {0, ..., bound-1}; Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

}  // namespace jkmap

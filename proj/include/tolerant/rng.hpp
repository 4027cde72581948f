#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tolerant {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a, used to turn experiment labels into stream ids.
inline constexpr std::uint64_t hash_label(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline constexpr std::uint64_t stream_id(std::uint64_t experiment, std::uint64_t replicate) {
    return splitmix64(experiment ^ splitmix64(replicate + 0x632be59bd9b4e019ULL));
}

// A (master_seed, stream_index) pair; draws depend only on these two numbers.
struct RandomStream {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_index = 0;

    std::mt19937_64 engine() const {
        std::uint64_t s = splitmix64(master_seed ^ splitmix64(stream_index));
        std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                          static_cast<std::uint32_t>(stream_index),
                          static_cast<std::uint32_t>(master_seed)};
        return std::mt19937_64(seq);
    }

    RandomStream child(std::uint64_t replicate) const {
        return {master_seed, stream_id(stream_index, replicate)};
    }
};

}  // namespace tolerant

#pragma once

#include <cstdint>
#include <random>

namespace ssfl {

/// Named random streams. Each consumer draws from its own generator derived
/// from (master seed, stream id, index) so adding draws in one place never
/// shifts another.
namespace stream {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kHeadInit = 2;
inline constexpr std::uint64_t kDataset = 3;
inline constexpr std::uint64_t kTestSplit = 4;
inline constexpr std::uint64_t kPartition = 5;
inline constexpr std::uint64_t kProfiles = 6;
inline constexpr std::uint64_t kConnectivity = 7;
inline constexpr std::uint64_t kBatches = 8;
}  // namespace stream

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id,
                                    std::uint64_t index = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream_id) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream_id,
                                std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(seed, stream_id, index));
}

}  // namespace ssfl

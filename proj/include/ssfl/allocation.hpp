#pragma once

// Resource-aware depth assignment. Each client reports (memory, latency)
// once; its prefix depth is
//   d = clamp(floor(alpha*m) + floor(beta*(lat_max-lat)/(lat_max-lat_min+eps)), 1, L-1).

#include <cstdint>
#include <vector>

#include "ssfl/supernet.hpp"

namespace ssfl {

struct ClientProfile {
    double memory_gb = 0.0;
    double latency_ms = 0.0;

    friend bool operator==(const ClientProfile&, const ClientProfile&) = default;
};

struct AllocationConfig {
    double alpha = 0.5;  // layers per GB
    double beta = 4.0;
    double epsilon = 1e-8;
    std::size_t total_layers = 0;  // L
};

struct ProfileRanges {
    double memory_min_gb = 2.0;
    double memory_max_gb = 16.0;
    double latency_min_ms = 20.0;
    double latency_max_ms = 200.0;

    friend bool operator==(const ProfileRanges&, const ProfileRanges&) = default;
};

/// Simulated profiling: uniform memory and latency per client.
std::vector<ClientProfile> measure_profiles(std::size_t num_clients, const ProfileRanges& ranges,
                                            std::uint64_t seed);

std::size_t compute_depth(const ClientProfile& profile, double lat_min, double lat_max,
                          const AllocationConfig& cfg);

struct LatencySpread {
    double min_ms;
    double max_ms;
};

LatencySpread latency_spread(const std::vector<ClientProfile>& profiles);

struct ClientAllocation {
    std::size_t depth = 0;
    std::vector<DenseLayer> encoder;
    ClientHead head;
};

/// Depth, encoder prefix and local head for every client. The latency range
/// is taken over this cohort. Head i is seeded from (head_seed, i).
std::vector<ClientAllocation> allocate_all(const std::vector<ClientProfile>& profiles,
                                           const AllocationConfig& cfg, const SuperNet& net,
                                           std::uint64_t head_seed);

}  // namespace ssfl

#include "ssfl/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "ssfl/errors.hpp"
#include "ssfl/rng.hpp"

namespace ssfl {

std::vector<ClientProfile> measure_profiles(std::size_t num_clients, const ProfileRanges& ranges,
                                            std::uint64_t seed) {
    if (num_clients == 0) throw InputError("need at least one client");
    auto rng = make_rng(seed, stream::kProfiles);
    std::uniform_real_distribution<double> mem(ranges.memory_min_gb, ranges.memory_max_gb);
    std::uniform_real_distribution<double> lat(ranges.latency_min_ms, ranges.latency_max_ms);
    std::vector<ClientProfile> out(num_clients);
    for (auto& p : out) {
        p.memory_gb = mem(rng);
        p.latency_ms = lat(rng);
    }
    return out;
}

std::size_t compute_depth(const ClientProfile& profile, double lat_min, double lat_max,
                          const AllocationConfig& cfg) {
    if (cfg.total_layers < 2) throw InputError("allocation needs L >= 2");
    if (!(cfg.epsilon > 0.0) || cfg.alpha < 0.0 || cfg.beta < 0.0) {
        throw InputError("allocation coefficients out of range");
    }
    if (!(profile.memory_gb > 0.0) || !std::isfinite(profile.memory_gb) ||
        !(profile.latency_ms > 0.0) || !std::isfinite(profile.latency_ms)) {
        throw InputError("client profile must be finite and positive");
    }
    if (profile.latency_ms < lat_min || profile.latency_ms > lat_max) {
        throw InputError("latency " + std::to_string(profile.latency_ms) + " ms outside [" +
                         std::to_string(lat_min) + ", " + std::to_string(lat_max) + "]");
    }
    const double memory_term = std::floor(cfg.alpha * profile.memory_gb);
    const double latency_term = std::floor(cfg.beta * (lat_max - profile.latency_ms) /
                                           (lat_max - lat_min + cfg.epsilon));
    const double cap = static_cast<double>(cfg.total_layers - 1);
    const double d = std::clamp(memory_term + latency_term, 1.0, cap);
    return static_cast<std::size_t>(d);
}

LatencySpread latency_spread(const std::vector<ClientProfile>& profiles) {
    if (profiles.empty()) throw InputError("no client profiles");
    auto [lo, hi] = std::minmax_element(profiles.begin(), profiles.end(),
                                        [](const auto& a, const auto& b) {
                                            return a.latency_ms < b.latency_ms;
                                        });
    return {lo->latency_ms, hi->latency_ms};
}

std::vector<ClientAllocation> allocate_all(const std::vector<ClientProfile>& profiles,
                                           const AllocationConfig& cfg, const SuperNet& net,
                                           std::uint64_t head_seed) {
    const auto spread = latency_spread(profiles);
    AllocationConfig local = cfg;
    local.total_layers = net.depth();
    std::vector<ClientAllocation> out;
    out.reserve(profiles.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto d = compute_depth(profiles[i], spread.min_ms, spread.max_ms, local);
        out.push_back({d, slice_prefix(net, d),
                       make_client_head(net, d, net.num_classes(), derive_seed(head_seed, stream::kHeadInit, i))});
    }
    return out;
}

}  // namespace ssfl

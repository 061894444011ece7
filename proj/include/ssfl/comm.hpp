#pragma once

// Message sizing for communication accounting: every payload element counts
// as 4 bytes (32-bit wire format) and every message carries a 16-byte frame.

#include <cstdint>
#include <span>

#include "ssfl/nn.hpp"

namespace ssfl {

inline constexpr std::uint64_t kBytesPerElement = 4;
inline constexpr std::uint64_t kFrameHeaderBytes = 16;

constexpr std::uint64_t account_bytes(std::uint64_t element_count) {
    return element_count * kBytesPerElement + kFrameHeaderBytes;
}

inline std::uint64_t account_bytes(const Tensor& t) { return account_bytes(t.size()); }

inline std::uint64_t account_bytes(std::span<const DenseLayer> params) {
    std::uint64_t n = 0;
    for (const auto& p : params) n += p.parameter_count();
    return account_bytes(n);
}

/// Multiply-adds x2 for one forward pass of `layers` over `batch` rows.
inline std::uint64_t forward_flops(std::span<const DenseLayer> layers, std::size_t batch) {
    std::uint64_t f = 0;
    for (const auto& l : layers) f += 2ULL * batch * l.in_dim() * l.out_dim();
    return f;
}

}  // namespace ssfl

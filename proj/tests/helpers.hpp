#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "ssfl/nn.hpp"
#include "ssfl/supernet.hpp"
#include "ssfl/tpgf.hpp"

namespace testutil {

/// Relative error with a denominator floor. Below the floor the comparison is
/// effectively absolute at floor * tolerance, which is still above the
/// round-off noise of a central difference with h = 1e-6.
inline double rel_err(double a, double b, double floor = 1e-4) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_rel_err(const ssfl::Tensor& a, const ssfl::Tensor& b, double floor = 1e-4) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i], floor));
    return m;
}

inline double max_rel_err(const ssfl::GradientSet& a, const ssfl::GradientSet& b, double floor = 1e-4) {
    double m = 0.0;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        m = std::max(m, max_rel_err(a.layers[l].weights, b.layers[l].weights, floor));
        m = std::max(m, max_rel_err(a.layers[l].bias, b.layers[l].bias, floor));
    }
    return m;
}

inline ssfl::Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double scale = 1.0) {
    ssfl::Tensor t(std::move(shape));
    std::normal_distribution<double> n(0.0, scale);
    for (double& v : t.values()) v = n(rng);
    return t;
}

/// Random dense stack: widths[0] is the input width; hidden layers use ReLU
/// and the last layer is Identity. Biases are non-zero.
inline std::vector<ssfl::DenseLayer> random_stack(const std::vector<std::size_t>& widths, std::mt19937_64& rng) {
    std::vector<ssfl::DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto act = l + 2 == widths.size() ? ssfl::Activation::Identity : ssfl::Activation::ReLU;
        auto layer = ssfl::make_dense(widths[l], widths[l + 1], act, rng);
        std::normal_distribution<double> n(0.0, 0.1);
        for (double& v : layer.bias.values()) v = n(rng);
        layers.push_back(std::move(layer));
    }
    return layers;
}

inline std::vector<int> random_labels(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> u(0, static_cast<int>(classes) - 1);
    std::vector<int> y(n);
    for (auto& v : y) v = u(rng);
    return y;
}

inline ssfl::Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes, std::mt19937_64& rng) {
    return {random_tensor({n, dim}, rng), random_labels(n, classes, rng)};
}

inline bool bitwise_equal(const ssfl::Tensor& a, const ssfl::Tensor& b) {
    return a.shape() == b.shape() && std::memcmp(a.raw().data(), b.raw().data(), a.size() * sizeof(double)) == 0;
}

/// FNV-1a over every parameter bit of a layer list.
inline std::uint64_t param_checksum(std::span<const ssfl::DenseLayer> layers) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const ssfl::Tensor& t) {
        const auto* p = reinterpret_cast<const unsigned char*>(t.raw().data());
        for (std::size_t i = 0; i < t.size() * sizeof(double); ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& l : layers) {
        mix(l.weights);
        mix(l.bias);
    }
    return h;
}

}  // namespace testutil

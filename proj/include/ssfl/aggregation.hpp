#pragma once

// End-of-round aggregation. Every client report gets one weight
//   w_i = d_i / sum_j d_j * (l_i + eps)^-1 / sum_j (l_j + eps)^-1
// where l_i is the client's fused loss. Each encoder layer is then averaged
// over the clients that hold it, pulled toward the server's copy:
//   theta_bar = (sum_i w_i theta_i + lambda theta_s) / (sum_i w_i + lambda).
// Classifier heads never take part.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ssfl/supernet.hpp"

namespace ssfl {

struct AggregationConfig {
    double lambda = 0.01;
    double epsilon = 1e-8;
    /// Rescale the weights of each layer's contributors to sum to one.
    bool renormalize_weights = false;
};

struct ClientReport {
    std::size_t client_id = 0;
    std::size_t depth = 0;
    std::vector<DenseLayer> encoder;
    double client_loss = 0.0;
    std::optional<double> server_loss;
};

struct AggWeight {
    std::size_t client_id = 0;
    double w = 0.0;
};

/// Client loss when the client saw no server supervision; otherwise the
/// convex mix of client and server loss under the fusion weight.
double fused_loss(const ClientReport& report, std::size_t total_layers, double epsilon);

std::vector<AggWeight> client_weights(std::span<const ClientReport> reports,
                                      std::size_t total_layers, const AggregationConfig& cfg);

struct LayerContribution {
    const DenseLayer* layer = nullptr;
    double weight = 0.0;
};

/// Closed-form minimiser of sum_i w_i |theta_i - x|^2 + lambda |theta_s - x|^2.
/// With no contributions the server layer is returned unchanged.
DenseLayer aggregate_layer(std::span<const LayerContribution> contributions,
                           const DenseLayer& server_layer, double lambda);

struct AggregationResult {
    std::vector<AggWeight> weights;
    std::vector<std::size_t> rejected;             // client ids failing alignment
    std::vector<std::size_t> contributors_per_layer;
};

/// Aggregates accepted reports into net's encoder in place. Reports whose
/// encoder is not a structurally aligned prefix are skipped.
AggregationResult aggregate_round(std::span<const ClientReport> reports, SuperNet& net,
                                  const AggregationConfig& cfg);

/// Minimises the aggregation objective by gradient descent with a
/// backtracking line search. Test oracle for aggregate_layer; intended for
/// small parameter vectors.
std::vector<double> numeric_minimizer_oracle(std::span<const std::vector<double>> thetas,
                                             std::span<const double> weights,
                                             const std::vector<double>& theta_server,
                                             double lambda, double tolerance = 1e-10);

}  // namespace ssfl

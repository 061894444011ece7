#pragma once

// Minimal dense network substrate: forward/backward with exact gradients,
// softmax cross-entropy, global-norm clipping and plain SGD.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ssfl/tensor.hpp"

namespace ssfl {

enum class Activation : std::uint8_t { ReLU = 0, Identity = 1 };

struct DenseLayer {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
    Activation activation = Activation::ReLU;

    DenseLayer() = default;
    DenseLayer(Tensor w, Tensor b, Activation act);

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }
    std::size_t parameter_count() const { return weights.size() + bias.size(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Glorot-uniform weights, zero bias.
DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng);

struct LayerGrad {
    Tensor weights;
    Tensor bias;

    friend bool operator==(const LayerGrad&, const LayerGrad&) = default;
};

/// Per-layer gradients for the contiguous layer range
/// [first_layer, first_layer + layers.size()).
struct GradientSet {
    std::size_t first_layer = 0;
    std::vector<LayerGrad> layers;

    std::size_t size() const { return layers.size(); }
    double squared_norm() const;
    double norm() const;

    friend bool operator==(const GradientSet&, const GradientSet&) = default;
};

/// Zero gradients shaped like `params`.
GradientSet zeros_like(std::span<const DenseLayer> params, std::size_t first_layer = 0);

/// Activations recorded by forward(); consumed by backward().
struct ForwardCache {
    std::vector<Tensor> inputs;       // input to each layer
    std::vector<Tensor> pre_act;      // affine output of each layer
    std::vector<std::size_t> in_dims;
    std::vector<std::size_t> out_dims;
};

struct ForwardResult {
    Tensor output;
    ForwardCache cache;
};

ForwardResult forward(std::span<const DenseLayer> layers, const Tensor& input);

/// Forward pass without keeping the cache, used for evaluation.
Tensor predict(std::span<const DenseLayer> layers, const Tensor& input);

struct LossResult {
    double loss = 0.0;
    Tensor grad;  // dLoss/dLogits, same shape as the logits
};

/// Mean softmax cross-entropy over the batch.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

struct BackwardResult {
    GradientSet grads;
    Tensor input_grad;
};

BackwardResult backward(std::span<const DenseLayer> layers, const ForwardCache& cache,
                        const Tensor& output_grad, std::size_t first_layer = 0);

/// Central differences of a scalar function of one tensor.
Tensor finite_diff_tensor(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          double h);

/// Central differences of a scalar function of a layer list, one entry per
/// parameter. Independent of forward/backward; used as a test oracle.
GradientSet finite_diff_oracle(
    const std::function<double(std::span<const DenseLayer>)>& loss_fn,
    std::span<const DenseLayer> params, double h);

/// Rescales the whole set so its global l2 norm is at most tau.
GradientSet clip_l2(const GradientSet& grads, double tau);

/// p <- p - eta * g, in place.
void sgd_step(std::span<DenseLayer> params, const GradientSet& grads, double eta);

/// a + b, entrywise. Both sets must cover the same range with equal shapes.
GradientSet add(const GradientSet& a, const GradientSet& b);
GradientSet scale(const GradientSet& g, double factor);

/// Throws StructuralError unless `grads` matches `params` layer by layer.
void require_aligned(std::span<const DenseLayer> params, const GradientSet& grads);

}  // namespace ssfl

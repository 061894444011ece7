#include "ssfl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssfl/errors.hpp"
#include "ssfl/kernels.hpp"

namespace ssfl {

namespace {

std::string layer_tag(std::size_t index) { return "layer " + std::to_string(index); }

kernels::GemmDims dims_of(const DenseLayer& layer, std::size_t batch) {
    return {batch, layer.in_dim(), layer.out_dim()};
}

void check_layer(const DenseLayer& layer, std::size_t index) {
    if (layer.weights.rank() != 2 || layer.bias.rank() != 1 ||
        layer.bias.size() != layer.weights.rows()) {
        throw StructuralError(layer_tag(index) + ": weight/bias shapes disagree");
    }
}

}  // namespace

DenseLayer::DenseLayer(Tensor w, Tensor b, Activation act)
    : weights(std::move(w)), bias(std::move(b)), activation(act) {
    check_layer(*this, 0);
}

DenseLayer make_dense(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng) {
    if (in == 0 || out == 0) throw StructuralError("dense layer dimensions must be positive");
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    Tensor w({out, in});
    for (double& v : w.values()) v = dist(rng);
    return DenseLayer(std::move(w), Tensor({out}), act);
}

double GradientSet::squared_norm() const {
    double s = 0.0;
    for (const auto& g : layers) s += ssfl::squared_norm(g.weights) + ssfl::squared_norm(g.bias);
    return s;
}

double GradientSet::norm() const { return std::sqrt(squared_norm()); }

GradientSet zeros_like(std::span<const DenseLayer> params, std::size_t first_layer) {
    GradientSet g;
    g.first_layer = first_layer;
    g.layers.reserve(params.size());
    for (const auto& p : params) g.layers.push_back({Tensor(p.weights.shape()), Tensor(p.bias.shape())});
    return g;
}

ForwardResult forward(std::span<const DenseLayer> layers, const Tensor& input) {
    if (layers.empty()) throw StructuralError("forward: empty layer list");
    if (input.rank() != 2) throw StructuralError("forward: input must be [batch, features]");
    const std::size_t batch = input.rows();

    ForwardResult r;
    r.cache.inputs.reserve(layers.size());
    r.cache.pre_act.reserve(layers.size());
    Tensor current = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        check_layer(layer, l);
        if (current.cols() != layer.in_dim()) {
            throw StructuralError(layer_tag(l) + ": expects " + std::to_string(layer.in_dim()) +
                                  " inputs, got " + std::to_string(current.cols()));
        }
        Tensor z({batch, layer.out_dim()});
        kernels::parallel::dense_forward(current.values(), layer.weights.values(),
                                         layer.bias.values(), z.values(), dims_of(layer, batch));
        Tensor a = z;
        if (layer.activation == Activation::ReLU) {
            for (double& v : a.values()) v = v > 0.0 ? v : 0.0;
        }
        r.cache.in_dims.push_back(layer.in_dim());
        r.cache.out_dims.push_back(layer.out_dim());
        r.cache.inputs.push_back(std::move(current));
        r.cache.pre_act.push_back(std::move(z));
        current = std::move(a);
    }
    r.output = std::move(current);
    return r;
}

Tensor predict(std::span<const DenseLayer> layers, const Tensor& input) {
    if (layers.empty()) throw StructuralError("predict: empty layer list");
    Tensor current = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (current.rank() != 2 || current.cols() != layer.in_dim()) {
            throw StructuralError(layer_tag(l) + ": input width mismatch");
        }
        Tensor z({current.rows(), layer.out_dim()});
        kernels::parallel::dense_forward(current.values(), layer.weights.values(),
                                         layer.bias.values(), z.values(),
                                         dims_of(layer, current.rows()));
        if (layer.activation == Activation::ReLU) {
            for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
        }
        current = std::move(z);
    }
    return current;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw StructuralError("softmax_cross_entropy: logits must be rank 2");
    const std::size_t batch = logits.rows();
    const std::size_t classes = logits.cols();
    if (labels.size() != batch) throw InputError("softmax_cross_entropy: label count != batch size");

    LossResult r{0.0, Tensor({batch, classes})};
    const double inv_batch = 1.0 / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw InputError("softmax_cross_entropy: label " + std::to_string(y) +
                             " outside [0, " + std::to_string(classes) + ")");
        }
        double peak = logits.at(b, 0);
        for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, logits.at(b, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c) denom += std::exp(logits.at(b, c) - peak);
        const double log_denom = std::log(denom);
        r.loss += (log_denom - (logits.at(b, static_cast<std::size_t>(y)) - peak)) * inv_batch;
        for (std::size_t c = 0; c < classes; ++c) {
            const double p = std::exp(logits.at(b, c) - peak - log_denom);
            r.grad.at(b, c) = (p - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_batch;
        }
    }
    return r;
}

BackwardResult backward(std::span<const DenseLayer> layers, const ForwardCache& cache,
                        const Tensor& output_grad, std::size_t first_layer) {
    const std::size_t n = layers.size();
    if (cache.inputs.size() != n || cache.pre_act.size() != n) {
        throw StructuralError("backward: cache was recorded for a different layer count");
    }
    for (std::size_t l = 0; l < n; ++l) {
        if (cache.in_dims[l] != layers[l].in_dim() || cache.out_dims[l] != layers[l].out_dim()) {
            throw StructuralError("backward: stale cache for " + layer_tag(l));
        }
    }
    if (!output_grad.same_shape(cache.pre_act.back())) {
        throw StructuralError("backward: output gradient shape does not match forward output");
    }

    BackwardResult r;
    r.grads.first_layer = first_layer;
    r.grads.layers.resize(n);
    Tensor upstream = output_grad;
    for (std::size_t k = n; k-- > 0;) {
        const auto& layer = layers[k];
        const Tensor& x = cache.inputs[k];
        const Tensor& z = cache.pre_act[k];
        const std::size_t batch = x.rows();
        if (layer.activation == Activation::ReLU) {
            for (std::size_t i = 0; i < upstream.size(); ++i) {
                if (!(z[i] > 0.0)) upstream[i] = 0.0;
            }
        }
        const auto d = dims_of(layer, batch);
        LayerGrad g{Tensor(layer.weights.shape()), Tensor(layer.bias.shape())};
        kernels::parallel::weight_grad(upstream.values(), x.values(), g.weights.values(), d);
        kernels::parallel::bias_grad(upstream.values(), g.bias.values(), d);
        Tensor dx({batch, layer.in_dim()});
        kernels::parallel::input_grad(upstream.values(), layer.weights.values(), dx.values(), d);
        r.grads.layers[k] = std::move(g);
        upstream = std::move(dx);
    }
    r.input_grad = std::move(upstream);
    return r;
}

Tensor finite_diff_tensor(const std::function<double(const Tensor&)>& f, const Tensor& x,
                          double h) {
    if (!(h > 0.0)) throw InputError("finite differences need h > 0");
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double up = f(probe);
        probe[i] = orig - h;
        const double down = f(probe);
        probe[i] = orig;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

GradientSet finite_diff_oracle(
    const std::function<double(std::span<const DenseLayer>)>& loss_fn,
    std::span<const DenseLayer> params, double h) {
    if (!(h > 0.0)) throw InputError("finite differences need h > 0");
    std::vector<DenseLayer> probe(params.begin(), params.end());
    GradientSet out = zeros_like(params);
    auto perturb = [&](double& slot, double& result) {
        const double orig = slot;
        slot = orig + h;
        const double up = loss_fn(probe);
        slot = orig - h;
        const double down = loss_fn(probe);
        slot = orig;
        result = (up - down) / (2.0 * h);
    };
    for (std::size_t l = 0; l < probe.size(); ++l) {
        for (std::size_t i = 0; i < probe[l].weights.size(); ++i)
            perturb(probe[l].weights[i], out.layers[l].weights[i]);
        for (std::size_t i = 0; i < probe[l].bias.size(); ++i)
            perturb(probe[l].bias[i], out.layers[l].bias[i]);
    }
    return out;
}

GradientSet clip_l2(const GradientSet& grads, double tau) {
    if (!(tau > 0.0)) throw InputError("clip threshold must be positive");
    const double n = grads.norm();
    if (n <= tau) return grads;
    // Rounding can leave the rescaled norm an ulp above tau; step the factor
    // down until it is not, so a second clip is a no-op.
    double factor = tau / n;
    GradientSet out = scale(grads, factor);
    while (out.norm() > tau) {
        factor = std::nextafter(factor, 0.0);
        out = scale(grads, factor);
    }
    return out;
}

void require_aligned(std::span<const DenseLayer> params, const GradientSet& grads) {
    if (params.size() != grads.size()) {
        throw StructuralError("gradient set covers " + std::to_string(grads.size()) +
                              " layers, parameters have " + std::to_string(params.size()));
    }
    for (std::size_t l = 0; l < params.size(); ++l) {
        if (!params[l].weights.same_shape(grads.layers[l].weights) ||
            !params[l].bias.same_shape(grads.layers[l].bias)) {
            throw StructuralError(layer_tag(l) + ": gradient shape does not match parameter");
        }
    }
}

void sgd_step(std::span<DenseLayer> params, const GradientSet& grads, double eta) {
    require_aligned(params, grads);
    for (std::size_t l = 0; l < params.size(); ++l) {
        auto& p = params[l];
        const auto& g = grads.layers[l];
        for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= eta * g.weights[i];
        for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= eta * g.bias[i];
    }
}

namespace {
void require_same_range(const GradientSet& a, const GradientSet& b) {
    if (a.first_layer != b.first_layer || a.size() != b.size()) {
        throw StructuralError("gradient sets cover different layer ranges");
    }
    for (std::size_t l = 0; l < a.size(); ++l) {
        if (!a.layers[l].weights.same_shape(b.layers[l].weights) ||
            !a.layers[l].bias.same_shape(b.layers[l].bias)) {
            throw StructuralError(layer_tag(a.first_layer + l) + ": gradient shapes differ");
        }
    }
}
}  // namespace

GradientSet add(const GradientSet& a, const GradientSet& b) {
    require_same_range(a, b);
    GradientSet out = a;
    for (std::size_t l = 0; l < a.size(); ++l) {
        for (std::size_t i = 0; i < out.layers[l].weights.size(); ++i)
            out.layers[l].weights[i] += b.layers[l].weights[i];
        for (std::size_t i = 0; i < out.layers[l].bias.size(); ++i)
            out.layers[l].bias[i] += b.layers[l].bias[i];
    }
    return out;
}

GradientSet scale(const GradientSet& g, double factor) {
    GradientSet out = g;
    for (auto& lg : out.layers) {
        for (double& v : lg.weights.values()) v *= factor;
        for (double& v : lg.bias.values()) v *= factor;
    }
    return out;
}

}  // namespace ssfl

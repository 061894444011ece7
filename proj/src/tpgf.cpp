#include "ssfl/tpgf.hpp"

#include <limits>
#include <string>

#include "ssfl/comm.hpp"
#include "ssfl/errors.hpp"

namespace ssfl {

FusionWeights fusion_weight(double client_loss, double server_loss, std::size_t client_depth,
                            std::size_t server_depth, double epsilon, FusionRule rule) {
    if (client_depth < 1 || server_depth < 1) throw InputError("fusion depths must be >= 1");
    if (client_loss < 0.0 || server_loss < 0.0) throw InputError("losses must be non-negative");
    const double depth_factor = static_cast<double>(client_depth) /
                                static_cast<double>(client_depth + server_depth);
    const double inv_c = 1.0 / (client_loss + epsilon);
    const double inv_s = 1.0 / (server_loss + epsilon);
    const double reliability = inv_c / (inv_c + inv_s);

    double w = 0.0;
    switch (rule) {
        case FusionRule::Full: w = depth_factor * reliability; break;
        case FusionRule::DepthOnly: w = depth_factor; break;
        case FusionRule::LossOnly: w = reliability; break;
        case FusionRule::Equal: w = 0.5; break;
    }
    return {w, 1.0 - w};
}

GradientSet fuse(const GradientSet& g_client, const GradientSet& g_server, FusionWeights w) {
    if (g_client.first_layer != g_server.first_layer || g_client.size() != g_server.size()) {
        throw StructuralError("fuse: client and server gradients cover different layers");
    }
    GradientSet out = g_client;
    for (std::size_t l = 0; l < out.size(); ++l) {
        auto& o = out.layers[l];
        const auto& c = g_client.layers[l];
        const auto& s = g_server.layers[l];
        if (!c.weights.same_shape(s.weights) || !c.bias.same_shape(s.bias)) {
            throw StructuralError("fuse: shape mismatch at layer " +
                                  std::to_string(g_client.first_layer + l + 1));
        }
        for (std::size_t i = 0; i < o.weights.size(); ++i)
            o.weights[i] = w.client * c.weights[i] + w.server * s.weights[i];
        for (std::size_t i = 0; i < o.bias.size(); ++i)
            o.bias[i] = w.client * c.bias[i] + w.server * s.bias[i];
    }
    return out;
}

ConnectivityOracle ConnectivityOracle::always_available() {
    return ConnectivityOracle([](std::size_t, std::size_t, std::size_t) { return 0.0; });
}

ConnectivityOracle ConnectivityOracle::never_available() {
    return ConnectivityOracle([](std::size_t, std::size_t, std::size_t) {
        return std::numeric_limits<double>::infinity();
    });
}

std::uint64_t smashed_upload_bytes(const Tensor& smashed, std::size_t label_count) {
    return account_bytes(smashed.size() + label_count);
}

namespace {
void check_batch(const ClientState& client, const Batch& batch) {
    if (batch.size() == 0) throw InputError("empty batch");
    if (batch.features.rank() != 2 || batch.features.rows() != batch.size()) {
        throw StructuralError("batch features and labels disagree on batch size");
    }
    if (client.encoder.size() != client.depth) {
        throw StructuralError("client " + std::to_string(client.id) + " prefix length != depth");
    }
}
}  // namespace

Phase1Result phase1_local(ClientState& client, const Batch& batch, const TpgfConfig& cfg) {
    check_batch(client, batch);
    Phase1Result r;
    auto enc = forward(client.encoder, batch.features);
    std::span<const DenseLayer> head_span(&client.head.layer, 1);
    auto head_fwd = forward(head_span, enc.output);
    auto loss = softmax_cross_entropy(head_fwd.output, batch.labels);
    auto head_bwd = backward(head_span, head_fwd.cache, loss.grad);
    // The encoder gradient is taken through the pre-update head.
    auto enc_bwd = backward(client.encoder, enc.cache, head_bwd.input_grad);
    sgd_step(std::span<DenseLayer>(&client.head.layer, 1), head_bwd.grads, cfg.eta);

    r.client_loss = loss.loss;
    r.raw_norm = enc_bwd.grads.norm();
    r.g_client = clip_l2(enc_bwd.grads, cfg.tau);
    r.smashed = std::move(enc.output);
    r.encoder_cache = std::move(enc.cache);
    const auto b = batch.size();
    // encoder forward + backward, head forward + backward
    r.flops = 3 * forward_flops(client.encoder, b) + 3 * forward_flops(head_span, b);
    client.last_client_loss = r.client_loss;
    return r;
}

Phase2Result phase2_server(SuperNet& server, const Tensor& smashed, std::span<const int> labels,
                           std::size_t client_depth, double eta) {
    if (client_depth < 1 || client_depth >= server.depth()) {
        throw InputError("client depth " + std::to_string(client_depth) + " leaves no server layers");
    }
    auto suffix = server.suffix_with_classifier(client_depth);
    if (smashed.rank() != 2 || smashed.cols() != suffix.front().in_dim()) {
        throw StructuralError("smashed data width does not match server layer " +
                              std::to_string(client_depth + 1));
    }
    auto fwd = forward(suffix, smashed);
    auto loss = softmax_cross_entropy(fwd.output, labels);
    // One backward pass serves both the suffix update and g_z.
    auto bwd = backward(suffix, fwd.cache, loss.grad, client_depth);
    sgd_step(suffix, bwd.grads, eta);
    return {loss.loss, std::move(bwd.input_grad),
            3 * forward_flops(std::span<const DenseLayer>(suffix), smashed.rows())};
}

StepOutcome fallback_step(ClientState& client, const Batch& batch, const TpgfConfig& cfg) {
    auto p1 = phase1_local(client, batch, cfg);
    sgd_step(client.encoder, p1.g_client, cfg.eta);
    client.in_fallback = true;
    client.last_server_loss.reset();

    StepOutcome out;
    out.mode = StepMode::Fallback;
    out.client_loss = p1.client_loss;
    out.fused_grad_norm = p1.g_client.norm();
    out.client_weight = 1.0;
    out.client_flops = p1.flops;
    return out;
}

StepOutcome tpgf_step(ClientState& client, SuperNet& server, const Batch& batch,
                      const ConnectivityOracle& connectivity, StepContext ctx,
                      const TpgfConfig& cfg) {
    if (connectivity.query(client.id, ctx.round, ctx.step, cfg.timeout_s) == Link::TimedOut) {
        return fallback_step(client, batch, cfg);
    }

    // Phase 1
    auto p1 = phase1_local(client, batch, cfg);

    // Phase 2
    auto p2 = phase2_server(server, p1.smashed, batch.labels, client.depth, cfg.eta);
    auto from_server = backward(client.encoder, p1.encoder_cache, p2.smashed_grad);

    // Phase 3
    const std::size_t server_depth = server.depth() - client.depth;
    FusionWeights w = fusion_weight(p1.client_loss, p2.server_loss, client.depth, server_depth,
                                    cfg.epsilon, cfg.rule);
    if (cfg.forced_client_weight) w = {*cfg.forced_client_weight, 1.0 - *cfg.forced_client_weight};
    auto fused = fuse(p1.g_client, from_server.grads, w);
    sgd_step(client.encoder, fused, cfg.eta);

    client.in_fallback = false;
    client.last_server_loss = p2.server_loss;

    StepOutcome out;
    out.mode = StepMode::Full;
    out.client_loss = p1.client_loss;
    out.server_loss = p2.server_loss;
    out.fused_grad_norm = fused.norm();
    out.client_weight = w.client;
    out.bytes_up = smashed_upload_bytes(p1.smashed, batch.size());
    out.bytes_down = account_bytes(p2.smashed_grad);
    out.client_flops = p1.flops + 2 * forward_flops(client.encoder, batch.size());
    out.server_flops = p2.flops;
    return out;
}

}  // namespace ssfl

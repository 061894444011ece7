#pragma once

// Three-phase gradient fusion and the fault-tolerant fallback step.
//
// Phase 1 trains the client head on the local loss and produces a clipped
// encoder gradient. Phase 2 ships the smashed activations to the server,
// which trains its suffix and returns dLoss/dSmashed. Phase 3 mixes the two
// encoder gradients with a loss- and depth-aware weight and steps the
// encoder. If the server misses the timeout the client runs Phase 1 alone
// and steps the encoder with its local gradient.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ssfl/allocation.hpp"
#include "ssfl/nn.hpp"
#include "ssfl/supernet.hpp"

namespace ssfl {

struct Batch {
    Tensor features;          // [B, D]
    std::vector<int> labels;  // [B]

    std::size_t size() const { return labels.size(); }
};

/// Which factors of the client weight are active.
enum class FusionRule { Full, DepthOnly, LossOnly, Equal };

struct FusionWeights {
    double client = 0.0;
    double server = 1.0;
};

/// w_client = d_i/(d_i+d_s) * (L_c+eps)^-1 / ((L_c+eps)^-1 + (L_s+eps)^-1),
/// w_server = 1 - w_client. DepthOnly drops the loss factor, LossOnly drops
/// the depth factor, Equal gives 0.5 to each branch.
FusionWeights fusion_weight(double client_loss, double server_loss, std::size_t client_depth,
                            std::size_t server_depth, double epsilon,
                            FusionRule rule = FusionRule::Full);

/// w.client * g_client + w.server * g_server, entrywise.
GradientSet fuse(const GradientSet& g_client, const GradientSet& g_server, FusionWeights w);

struct TpgfConfig {
    double tau = 0.5;
    double eta = 0.05;
    double epsilon = 1e-8;
    double timeout_s = 5.0;
    FusionRule rule = FusionRule::Full;
    /// Overrides the computed client weight. Used for equivalence checks.
    std::optional<double> forced_client_weight;
};

struct ClientState {
    std::size_t id = 0;
    std::size_t depth = 0;
    std::vector<DenseLayer> encoder;
    ClientHead head;
    ClientProfile profile;
    bool in_fallback = false;
    double last_client_loss = 0.0;
    std::optional<double> last_server_loss;
};

enum class StepMode { Full, Fallback, Stalled };

struct StepOutcome {
    StepMode mode = StepMode::Full;
    double client_loss = 0.0;
    std::optional<double> server_loss;
    double fused_grad_norm = 0.0;
    double client_weight = 0.0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;
    std::uint64_t client_flops = 0;
    std::uint64_t server_flops = 0;
};

enum class Link { Available, TimedOut };

/// Decides whether the server answers a client's request in time. The
/// schedule maps (client, round, step) to a simulated response delay in
/// seconds; the request times out when the delay exceeds the timeout.
class ConnectivityOracle {
public:
    using DelayFn = std::function<double(std::size_t client, std::size_t round, std::size_t step)>;

    explicit ConnectivityOracle(DelayFn delay) : delay_(std::move(delay)) {}

    static ConnectivityOracle always_available();
    static ConnectivityOracle never_available();

    double response_delay(std::size_t client, std::size_t round, std::size_t step) const {
        return delay_(client, round, step);
    }
    Link query(std::size_t client, std::size_t round, std::size_t step, double timeout_s) const {
        return response_delay(client, round, step) <= timeout_s ? Link::Available : Link::TimedOut;
    }

private:
    DelayFn delay_;
};

struct StepContext {
    std::size_t round = 0;
    std::size_t step = 0;
};

struct Phase1Result {
    double client_loss = 0.0;
    GradientSet g_client;  // clipped
    double raw_norm = 0.0;
    Tensor smashed;
    ForwardCache encoder_cache;
    std::uint64_t flops = 0;
};

/// Local supervision: forward through the prefix and the head, update the
/// head, return the clipped encoder gradient of the local loss.
Phase1Result phase1_local(ClientState& client, const Batch& batch, const TpgfConfig& cfg);

struct Phase2Result {
    double server_loss = 0.0;
    Tensor smashed_grad;  // g_z
    std::uint64_t flops = 0;
};

/// Server supervision for a client split after `client_depth` layers:
/// run layers client_depth+1..L and the classifier, step them, return g_z.
Phase2Result phase2_server(SuperNet& server, const Tensor& smashed, std::span<const int> labels,
                           std::size_t client_depth, double eta);

StepOutcome tpgf_step(ClientState& client, SuperNet& server, const Batch& batch,
                      const ConnectivityOracle& connectivity, StepContext ctx,
                      const TpgfConfig& cfg);

/// Client-only training step: Phase 1 followed by an encoder step with the
/// clipped local gradient. Never touches the server.
StepOutcome fallback_step(ClientState& client, const Batch& batch, const TpgfConfig& cfg);

/// Bytes for the upload of smashed activations plus labels.
std::uint64_t smashed_upload_bytes(const Tensor& smashed, std::size_t label_count);

}  // namespace ssfl

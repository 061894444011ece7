#pragma once

// Deterministic experiment engine: connectivity schedules, the simulated
// clock, the byte ledger, the SFL baseline step and the round loop.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssfl/config.hpp"
#include "ssfl/data.hpp"
#include "ssfl/tpgf.hpp"

namespace ssfl {

/// Per (client, round) availability with probability `availability`; the
/// status is constant within a round.
ConnectivityOracle sample_connectivity(std::size_t num_clients, std::size_t rounds,
                                       double availability, std::uint64_t seed);

enum class TrafficKind { SmashedUp, GradientDown, ReportUp, Broadcast };

struct TrafficEvent {
    std::size_t round = 0;
    std::size_t client = 0;
    TrafficKind kind = TrafficKind::SmashedUp;
    std::uint64_t bytes = 0;
};

/// Event log plus running totals. Uploads are smashed data and end-of-round
/// model reports; downloads are returned gradients; broadcasts are models
/// pushed to clients.
class CommLedger {
public:
    void record(std::size_t round, std::size_t client, TrafficKind kind, std::uint64_t bytes);

    std::uint64_t bytes_up() const { return up_; }
    std::uint64_t bytes_down() const { return down_; }
    std::uint64_t bytes_broadcast() const { return broadcast_; }
    std::uint64_t total() const { return up_ + down_ + broadcast_; }
    const std::vector<TrafficEvent>& events() const { return events_; }

    /// Re-sums the event log and compares it with the running totals.
    bool balanced() const;

private:
    std::vector<TrafficEvent> events_;
    std::uint64_t up_ = 0;
    std::uint64_t down_ = 0;
    std::uint64_t broadcast_ = 0;
};

class SimClock {
public:
    double now() const { return now_s_; }
    void advance(double seconds);

private:
    double now_s_ = 0.0;
};

/// Simulated time one client spent in a round.
struct ClientPath {
    std::size_t client = 0;
    double compute_s = 0.0;
    double comm_s = 0.0;
    double stall_s = 0.0;

    double total() const { return compute_s + comm_s + stall_s; }
};

/// Round duration = slowest client path + aggregation time; advances the
/// clock by it and returns it.
double advance_clock(SimClock& clock, const std::vector<ClientPath>& paths, double aggregation_s);

/// Plain split-learning step with a fixed split: the encoder is trained by
/// the server-returned gradient only. When the server times out the client
/// stalls and nothing changes.
StepOutcome baseline_sfl_step(ClientState& client, SuperNet& server, const Batch& batch,
                              Link link, double eta);

struct RoundMetrics {
    std::size_t round = 0;
    Mode mode = Mode::SSFL;
    double test_accuracy = 0.0;
    std::uint64_t cumulative_bytes_up = 0;
    std::uint64_t cumulative_bytes_down = 0;
    std::uint64_t cumulative_broadcast_bytes = 0;
    double simulated_time_s = 0.0;
    std::size_t fallback_step_count = 0;
    std::optional<double> mean_client_loss;
    std::optional<double> mean_server_loss;
    /// Mean over clients of (global prefix + own head) accuracy. Absent for
    /// the SFL baseline, whose clients have no head.
    std::optional<double> client_test_accuracy;

    std::uint64_t cumulative_bytes() const {
        return cumulative_bytes_up + cumulative_bytes_down + cumulative_broadcast_bytes;
    }
    friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

/// Per-client aggregation audit record.
struct ClientAudit {
    std::size_t round = 0;
    std::size_t client = 0;
    std::size_t depth = 0;
    std::size_t full_steps = 0;
    std::size_t fallback_steps = 0;
    std::size_t stalled_steps = 0;
    std::optional<double> client_loss;
    std::optional<double> server_loss;
    double weight = 0.0;
};

struct ExperimentResult {
    std::vector<RoundMetrics> rounds;
    std::vector<ClientAudit> audit;
    std::vector<std::size_t> client_depths;
    CommLedger ledger;
    /// Byte totals counted independently of the ledger, from step outcomes
    /// and message sizes.
    std::uint64_t independent_up = 0;
    std::uint64_t independent_down = 0;
    std::uint64_t independent_broadcast = 0;
    SuperNet final_model;

    bool ledger_consistent() const;
};

/// Everything a run derives from its seed before training starts.
struct ExperimentSetup {
    TrainTestSplit data;
    std::vector<Shard> shards;
    std::vector<ClientProfile> profiles;
    SuperNet net;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

/// Accuracy of the full global model on `ds`.
double evaluate(const SuperNet& net, const Dataset& ds);
double evaluate(std::span<const DenseLayer> layers, const Dataset& ds);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace ssfl

#include "ssfl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "ssfl/allocation.hpp"
#include "ssfl/comm.hpp"
#include "ssfl/errors.hpp"
#include "ssfl/rng.hpp"

namespace ssfl {

ConnectivityOracle sample_connectivity([[maybe_unused]] std::size_t num_clients,
                                       [[maybe_unused]] std::size_t rounds, double availability,
                                       std::uint64_t seed) {
    if (!(availability >= 0.0 && availability <= 1.0)) {
        throw InputError("availability must lie in [0, 1]");
    }
    // One uniform draw per (client, round), hashed rather than tabulated so the
    // schedule extends past `rounds` without changing earlier entries.
    const std::uint64_t base = derive_seed(seed, stream::kConnectivity);
    return ConnectivityOracle([base, availability](std::size_t client, std::size_t round, std::size_t) {
        const std::uint64_t h = splitmix64(base ^ splitmix64(client * 0x100000001b3ULL + round));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        return u < availability ? 0.0 : std::numeric_limits<double>::infinity();
    });
}

void CommLedger::record(std::size_t round, std::size_t client, TrafficKind kind,
                        std::uint64_t bytes) {
    events_.push_back({round, client, kind, bytes});
    switch (kind) {
        case TrafficKind::SmashedUp:
        case TrafficKind::ReportUp: up_ += bytes; break;
        case TrafficKind::GradientDown: down_ += bytes; break;
        case TrafficKind::Broadcast: broadcast_ += bytes; break;
    }
}

bool CommLedger::balanced() const {
    std::uint64_t up = 0, down = 0, bc = 0;
    for (const auto& e : events_) {
        switch (e.kind) {
            case TrafficKind::SmashedUp:
            case TrafficKind::ReportUp: up += e.bytes; break;
            case TrafficKind::GradientDown: down += e.bytes; break;
            case TrafficKind::Broadcast: bc += e.bytes; break;
        }
    }
    return up == up_ && down == down_ && bc == broadcast_;
}

void SimClock::advance(double seconds) {
    if (!(seconds >= 0.0)) throw InputError("clock cannot move backwards");
    now_s_ += seconds;
}

double advance_clock(SimClock& clock, const std::vector<ClientPath>& paths, double aggregation_s) {
    double slowest = 0.0;
    for (const auto& p : paths) slowest = std::max(slowest, p.total());
    const double duration = slowest + aggregation_s;
    clock.advance(duration);
    return duration;
}

StepOutcome baseline_sfl_step(ClientState& client, SuperNet& server, const Batch& batch,
                              Link link, double eta) {
    StepOutcome out;
    if (link == Link::TimedOut) {
        out.mode = StepMode::Stalled;
        return out;
    }
    auto enc = forward(client.encoder, batch.features);
    auto p2 = phase2_server(server, enc.output, batch.labels, client.depth, eta);
    auto g = backward(client.encoder, enc.cache, p2.smashed_grad);
    sgd_step(client.encoder, g.grads, eta);
    client.last_server_loss = p2.server_loss;

    out.mode = StepMode::Full;
    out.client_loss = p2.server_loss;
    out.server_loss = p2.server_loss;
    out.fused_grad_norm = g.grads.norm();
    out.bytes_up = smashed_upload_bytes(enc.output, batch.size());
    out.bytes_down = account_bytes(p2.smashed_grad);
    out.client_flops = 3 * forward_flops(client.encoder, batch.size());
    out.server_flops = p2.flops;
    return out;
}

bool ExperimentResult::ledger_consistent() const {
    return ledger.balanced() && ledger.bytes_up() == independent_up &&
           ledger.bytes_down() == independent_down &&
           ledger.bytes_broadcast() == independent_broadcast;
}

double evaluate(std::span<const DenseLayer> layers, const Dataset& ds) {
    if (ds.size() == 0) return 0.0;
    const Tensor logits = predict(layers, ds.features);
    std::size_t correct = 0;
    for (std::size_t n = 0; n < ds.size(); ++n) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            if (logits.at(n, c) > logits.at(n, best)) best = c;
        }
        if (static_cast<int>(best) == ds.labels[n]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double evaluate(const SuperNet& net, const Dataset& ds) { return evaluate(net.all_layers(), ds); }

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    const auto& d = cfg.dataset;
    auto full = generate_dataset(d.num_classes, d.dim, d.count, d.spread, cfg.seed);
    ExperimentSetup s{split_train_test(full, d.test_fraction, cfg.seed), {}, {}, {}};
    s.shards = dirichlet_partition(s.data.train, cfg.num_clients, cfg.partition.concentration,
                                   cfg.seed, cfg.partition.min_samples);
    s.profiles = cfg.allocation.profiles.empty()
                     ? measure_profiles(cfg.num_clients, cfg.allocation.ranges, cfg.seed)
                     : cfg.allocation.profiles;
    s.net = build_supernet(cfg.layer_dims, d.num_classes, cfg.seed);
    return s;
}

namespace {

/// Cycles through a shard in seeded random order, one batch at a time.
class BatchSampler {
public:
    BatchSampler(std::vector<std::size_t> indices, std::uint64_t seed, std::size_t client)
        : indices_(std::move(indices)), rng_(make_rng(seed, stream::kBatches, client)) {
        std::shuffle(indices_.begin(), indices_.end(), rng_);
    }

    bool empty() const { return indices_.empty(); }

    std::span<const std::size_t> next(std::size_t batch_size) {
        const std::size_t b = std::min(batch_size, indices_.size());
        if (pos_ + b > indices_.size()) {
            std::shuffle(indices_.begin(), indices_.end(), rng_);
            pos_ = 0;
        }
        std::span<const std::size_t> out(indices_.data() + pos_, b);
        pos_ += b;
        return out;
    }

private:
    std::vector<std::size_t> indices_;
    std::mt19937_64 rng_;
    std::size_t pos_ = 0;
};

struct RoundTally {
    std::size_t full = 0;
    std::size_t fallback = 0;
    std::size_t stalled = 0;
    double client_loss_sum = 0.0;
    std::size_t client_loss_n = 0;
    double server_loss_sum = 0.0;
    std::size_t server_loss_n = 0;

    std::optional<double> client_loss() const {
        if (client_loss_n == 0) return std::nullopt;
        return client_loss_sum / static_cast<double>(client_loss_n);
    }
    std::optional<double> server_loss() const {
        if (server_loss_n == 0) return std::nullopt;
        return server_loss_sum / static_cast<double>(server_loss_n);
    }
};

double client_path_accuracy(const SuperNet& net, const std::vector<ClientState>& clients,
                            const std::vector<BatchSampler>& samplers, const Dataset& test) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        if (samplers[i].empty()) continue;
        std::vector<DenseLayer> path(net.encoder().begin(),
                                     net.encoder().begin() + static_cast<std::ptrdiff_t>(clients[i].depth));
        path.push_back(clients[i].head.layer);
        sum += evaluate(path, test);
        ++n;
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::uint64_t aggregation_flops(const SuperNet& net, const std::vector<std::size_t>& contributors) {
    std::uint64_t f = 0;
    for (std::size_t l = 0; l < contributors.size(); ++l) {
        f += 2ULL * net.encoder()[l].parameter_count() * (contributors[l] + 1);
    }
    return f;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    auto setup = prepare_experiment(cfg);
    const auto& train = setup.data.train;
    const auto& test = setup.data.test;
    SuperNet& net = setup.net;
    const std::size_t L = net.depth();
    const TpgfConfig tpgf = cfg.tpgf_config();
    const AggregationConfig agg = cfg.aggregation_config();

    std::vector<ClientState> clients(cfg.num_clients);
    if (cfg.mode == Mode::SFL) {
        const std::size_t d = cfg.effective_sfl_depth();
        for (std::size_t i = 0; i < cfg.num_clients; ++i) {
            clients[i].id = i;
            clients[i].depth = d;
            clients[i].encoder = slice_prefix(net, d);
            clients[i].profile = setup.profiles[i];
        }
    } else {
        AllocationConfig alloc{cfg.allocation.alpha, cfg.allocation.beta, cfg.allocation.epsilon, L};
        auto allocations = allocate_all(setup.profiles, alloc, net, cfg.seed);
        for (std::size_t i = 0; i < cfg.num_clients; ++i) {
            clients[i].id = i;
            clients[i].depth = allocations[i].depth;
            clients[i].encoder = std::move(allocations[i].encoder);
            clients[i].head = std::move(allocations[i].head);
            clients[i].profile = setup.profiles[i];
        }
    }

    std::vector<BatchSampler> samplers;
    samplers.reserve(cfg.num_clients);
    for (std::size_t i = 0; i < cfg.num_clients; ++i) samplers.emplace_back(setup.shards[i].indices, cfg.seed, i);

    const auto connectivity = sample_connectivity(cfg.num_clients, cfg.rounds, cfg.availability, cfg.seed);

    ExperimentResult result;
    for (const auto& c : clients) result.client_depths.push_back(c.depth);
    SimClock clock;
    auto& ledger = result.ledger;

    // Initial distribution of every prefix.
    for (const auto& c : clients) {
        if (samplers[c.id].empty()) continue;
        const auto bytes = account_bytes(std::span<const DenseLayer>(c.encoder));
        ledger.record(0, c.id, TrafficKind::Broadcast, bytes);
        result.independent_broadcast += bytes;
    }

    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        std::vector<RoundTally> tally(cfg.num_clients);
        std::vector<ClientPath> paths(cfg.num_clients);
        for (std::size_t i = 0; i < cfg.num_clients; ++i) paths[i].client = i;

        for (std::size_t step = 0; step < cfg.steps_per_round; ++step) {
            for (auto& client : clients) {
                auto& sampler = samplers[client.id];
                if (sampler.empty()) continue;
                const Batch batch = make_batch(train, sampler.next(cfg.batch_size));
                const StepContext ctx{round, step};

                StepOutcome out;
                switch (cfg.mode) {
                    case Mode::SSFL: {
                        const bool reachable = connectivity.query(client.id, round, step, tpgf.timeout_s) ==
                                               Link::Available;
                        if (reachable && client.in_fallback && cfg.aggregation.resync_on_reconnect) {
                            client.encoder = slice_prefix(net, client.depth);
                            const auto bytes = account_bytes(std::span<const DenseLayer>(client.encoder));
                            ledger.record(round, client.id, TrafficKind::Broadcast, bytes);
                            result.independent_broadcast += bytes;
                        }
                        out = tpgf_step(client, net, batch, connectivity, ctx, tpgf);
                        break;
                    }
                    case Mode::Local:
                        out = fallback_step(client, batch, tpgf);
                        break;
                    case Mode::SFL:
                        out = baseline_sfl_step(client, net, batch,
                                                connectivity.query(client.id, round, step, tpgf.timeout_s),
                                                tpgf.eta);
                        break;
                }

                auto& t = tally[client.id];
                auto& path = paths[client.id];
                switch (out.mode) {
                    case StepMode::Full:
                        ++t.full;
                        path.comm_s += 2.0 * client.profile.latency_ms / 1000.0;
                        break;
                    case StepMode::Fallback: ++t.fallback; break;
                    case StepMode::Stalled:
                        ++t.stalled;
                        path.stall_s += tpgf.timeout_s;
                        break;
                }
                path.compute_s += cfg.compute_seconds_per_flop *
                                  static_cast<double>(out.client_flops + out.server_flops);
                if (out.mode != StepMode::Stalled) {
                    if (cfg.mode != Mode::SFL) {
                        t.client_loss_sum += out.client_loss;
                        ++t.client_loss_n;
                    }
                    if (out.server_loss) {
                        t.server_loss_sum += *out.server_loss;
                        ++t.server_loss_n;
                    }
                }
                if (out.bytes_up > 0) ledger.record(round, client.id, TrafficKind::SmashedUp, out.bytes_up);
                if (out.bytes_down > 0) ledger.record(round, client.id, TrafficKind::GradientDown, out.bytes_down);
                result.independent_up += out.bytes_up;
                result.independent_down += out.bytes_down;
            }
        }

        // Reports from every client that trained this round.
        std::vector<ClientReport> reports;
        for (const auto& client : clients) {
            const auto& t = tally[client.id];
            if (t.full + t.fallback == 0) continue;
            ClientReport r;
            r.client_id = client.id;
            r.depth = client.depth;
            r.encoder = client.encoder;
            if (cfg.mode == Mode::SFL) {
                r.client_loss = t.server_loss().value_or(0.0);
            } else {
                r.client_loss = t.client_loss().value_or(0.0);
                r.server_loss = t.server_loss();
            }
            std::uint64_t params = 0;
            for (const auto& layer : client.encoder) params += layer.parameter_count();
            const auto bytes = account_bytes(params + 2);  // parameters + two losses
            ledger.record(round, client.id, TrafficKind::ReportUp, bytes);
            result.independent_up += bytes;
            reports.push_back(std::move(r));
        }

        std::vector<double> weight_of(cfg.num_clients, 0.0);
        std::vector<std::size_t> contributors(L, 0);
        if (!reports.empty()) {
            if (cfg.mode == Mode::SFL) {
                // FedAvg over the client-side models, weighted by shard size.
                double total = 0.0;
                for (const auto& r : reports) total += static_cast<double>(setup.shards[r.client_id].indices.size());
                for (std::size_t l = 0; l < L; ++l) {
                    std::vector<LayerContribution> contribs;
                    for (const auto& r : reports) {
                        if (r.depth <= l) continue;
                        const double w = static_cast<double>(setup.shards[r.client_id].indices.size()) / total;
                        contribs.push_back({&r.encoder[l], w});
                        weight_of[r.client_id] = w;
                    }
                    contributors[l] = contribs.size();
                    net.encoder()[l] = aggregate_layer(contribs, net.encoder()[l], 0.0);
                }
            } else {
                auto agg_result = aggregate_round(reports, net, agg);
                for (const auto& w : agg_result.weights) weight_of[w.client_id] = w.w;
                contributors = agg_result.contributors_per_layer;
            }
        }

        // Broadcast fresh prefixes.
        for (auto& client : clients) {
            if (samplers[client.id].empty()) continue;
            client.encoder = slice_prefix(net, client.depth);
            const auto bytes = account_bytes(std::span<const DenseLayer>(client.encoder));
            ledger.record(round, client.id, TrafficKind::Broadcast, bytes);
            result.independent_broadcast += bytes;
        }

        const double agg_s = reports.empty() ? 0.0
                                            : cfg.compute_seconds_per_flop *
                                                  static_cast<double>(aggregation_flops(net, contributors));
        advance_clock(clock, paths, agg_s);

        RoundMetrics m;
        m.round = round;
        m.mode = cfg.mode;
        m.test_accuracy = evaluate(net, test);
        m.cumulative_bytes_up = ledger.bytes_up();
        m.cumulative_bytes_down = ledger.bytes_down();
        m.cumulative_broadcast_bytes = ledger.bytes_broadcast();
        m.simulated_time_s = clock.now();
        double cl = 0.0, sl = 0.0;
        std::size_t cn = 0, sn = 0;
        for (const auto& t : tally) {
            m.fallback_step_count += t.fallback;
            cl += t.client_loss_sum;
            cn += t.client_loss_n;
            sl += t.server_loss_sum;
            sn += t.server_loss_n;
        }
        if (cn > 0) m.mean_client_loss = cl / static_cast<double>(cn);
        if (sn > 0) m.mean_server_loss = sl / static_cast<double>(sn);
        if (cfg.mode != Mode::SFL) m.client_test_accuracy = client_path_accuracy(net, clients, samplers, test);
        result.rounds.push_back(m);

        for (const auto& client : clients) {
            const auto& t = tally[client.id];
            result.audit.push_back({round, client.id, client.depth, t.full, t.fallback, t.stalled,
                                    t.client_loss(), t.server_loss(), weight_of[client.id]});
        }
    }
    result.final_model = net;
    return result;
}

}  // namespace ssfl

#include "ssfl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ssfl/errors.hpp"
#include "ssfl/kernels.hpp"
#include "ssfl/tpgf.hpp"

namespace ssfl {

double fused_loss(const ClientReport& report, std::size_t total_layers, double epsilon) {
    if (!report.server_loss) return report.client_loss;
    if (report.depth < 1 || report.depth >= total_layers) {
        throw InputError("report depth outside [1, L-1]");
    }
    const auto w = fusion_weight(report.client_loss, *report.server_loss, report.depth,
                                 total_layers - report.depth, epsilon);
    return w.client * report.client_loss + w.server * *report.server_loss;
}

std::vector<AggWeight> client_weights(std::span<const ClientReport> reports,
                                      std::size_t total_layers, const AggregationConfig& cfg) {
    if (reports.empty()) throw InputError("client_weights: no reports");
    double depth_sum = 0.0;
    double inv_loss_sum = 0.0;
    std::vector<double> inv_loss(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        depth_sum += static_cast<double>(reports[i].depth);
        inv_loss[i] = 1.0 / (fused_loss(reports[i], total_layers, cfg.epsilon) + cfg.epsilon);
        inv_loss_sum += inv_loss[i];
    }
    std::vector<AggWeight> out;
    out.reserve(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const double w = (static_cast<double>(reports[i].depth) / depth_sum) *
                         (inv_loss[i] / inv_loss_sum);
        out.push_back({reports[i].client_id, w});
    }
    return out;
}

namespace {

void blend_tensor(const Tensor& base, std::span<const LayerContribution> contributions,
                  bool weights_part, std::span<const double> coef, double base_coef, Tensor& out) {
    std::vector<std::span<const double>> sources;
    sources.reserve(contributions.size());
    for (const auto& c : contributions) {
        sources.push_back(weights_part ? c.layer->weights.values() : c.layer->bias.values());
    }
    kernels::parallel::blend(base.values(), sources, coef, base_coef, out.values());
}

}  // namespace

DenseLayer aggregate_layer(std::span<const LayerContribution> contributions,
                           const DenseLayer& server_layer, double lambda) {
    if (lambda < 0.0) throw InputError("lambda must be non-negative");
    if (contributions.empty()) return server_layer;
    double total = lambda;
    for (const auto& c : contributions) {
        if (c.layer == nullptr || !c.layer->weights.same_shape(server_layer.weights) ||
            !c.layer->bias.same_shape(server_layer.bias)) {
            throw StructuralError("aggregate_layer: contribution shape differs from server layer");
        }
        if (c.weight < 0.0 || !std::isfinite(c.weight)) {
            throw InputError("aggregate_layer: weights must be finite and non-negative");
        }
        total += c.weight;
    }
    if (!(total > 0.0)) return server_layer;

    std::vector<double> coef;
    coef.reserve(contributions.size());
    for (const auto& c : contributions) coef.push_back(c.weight / total);
    const double base_coef = lambda / total;

    DenseLayer out = server_layer;
    blend_tensor(server_layer.weights, contributions, true, coef, base_coef, out.weights);
    blend_tensor(server_layer.bias, contributions, false, coef, base_coef, out.bias);
    return out;
}

AggregationResult aggregate_round(std::span<const ClientReport> reports, SuperNet& net,
                                  const AggregationConfig& cfg) {
    AggregationResult result;
    std::vector<ClientReport> accepted;
    for (const auto& r : reports) {
        if (r.depth >= 1 && r.depth < net.depth() && check_alignment(net, r.encoder, r.depth)) {
            accepted.push_back(r);
        } else {
            result.rejected.push_back(r.client_id);
        }
    }
    // Summation order follows client id, so report order cannot change a bit.
    std::sort(accepted.begin(), accepted.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    const std::size_t L = net.depth();
    result.contributors_per_layer.assign(L, 0);
    if (accepted.empty()) return result;

    result.weights = client_weights(accepted, L, cfg);

    // Layers are independent; the new encoder is assembled in layer order.
    std::vector<DenseLayer> updated(L);
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<LayerContribution> contribs;
        for (std::size_t i = 0; i < accepted.size(); ++i) {
            if (accepted[i].depth > l) contribs.push_back({&accepted[i].encoder[l], result.weights[i].w});
        }
        result.contributors_per_layer[l] = contribs.size();
        if (cfg.renormalize_weights && !contribs.empty()) {
            double s = 0.0;
            for (const auto& c : contribs) s += c.weight;
            if (s > 0.0) {
                for (auto& c : contribs) c.weight /= s;
            }
        }
        updated[l] = aggregate_layer(contribs, net.encoder()[l], cfg.lambda);
    }
    auto enc = net.encoder();
    for (std::size_t l = 0; l < L; ++l) enc[l] = std::move(updated[l]);
    return result;
}

std::vector<double> numeric_minimizer_oracle(std::span<const std::vector<double>> thetas,
                                             std::span<const double> weights,
                                             const std::vector<double>& theta_server,
                                             double lambda, double tolerance) {
    const std::size_t n = theta_server.size();
    auto objective = [&](const std::vector<double>& x) {
        double f = 0.0;
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const double d = thetas[i][k] - x[k];
                f += weights[i] * d * d;
            }
        }
        for (std::size_t k = 0; k < n; ++k) {
            const double d = theta_server[k] - x[k];
            f += lambda * d * d;
        }
        return f;
    };
    auto gradient = [&](const std::vector<double>& x) {
        std::vector<double> g(n, 0.0);
        for (std::size_t i = 0; i < thetas.size(); ++i) {
            for (std::size_t k = 0; k < n; ++k) g[k] += 2.0 * weights[i] * (x[k] - thetas[i][k]);
        }
        for (std::size_t k = 0; k < n; ++k) g[k] += 2.0 * lambda * (x[k] - theta_server[k]);
        return g;
    };

    std::vector<double> x(n, 0.0);
    double step = 1.0;
    for (int iter = 0; iter < 100000; ++iter) {
        const auto g = gradient(x);
        const double gg = std::inner_product(g.begin(), g.end(), g.begin(), 0.0);
        if (std::sqrt(gg) < tolerance) break;
        const double f0 = objective(x);
        std::vector<double> trial(n);
        step *= 2.0;
        while (true) {
            for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] - step * g[k];
            if (objective(trial) <= f0 - 0.5 * step * gg || step < 1e-300) break;
            step *= 0.5;
        }
        if (trial == x) break;
        x = trial;
    }
    return x;
}

}  // namespace ssfl

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "ssfl/aggregation.hpp"
#include "ssfl/errors.hpp"

using namespace ssfl;

namespace {

DenseLayer scalar_layer(double v) {
    return DenseLayer(Tensor::matrix(1, 1, {v}), Tensor::vector({v}), Activation::ReLU);
}

ClientReport report(std::size_t id, std::size_t depth, double cl, std::optional<double> sl = std::nullopt) {
    ClientReport r;
    r.client_id = id;
    r.depth = depth;
    r.client_loss = cl;
    r.server_loss = sl;
    return r;
}

DenseLayer random_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return DenseLayer(testutil::random_tensor({out, in}, rng), testutil::random_tensor({out}, rng), Activation::ReLU);
}

std::vector<double> flatten(const DenseLayer& l) {
    std::vector<double> v(l.weights.raw());
    v.insert(v.end(), l.bias.raw().begin(), l.bias.raw().end());
    return v;
}

}  // namespace

TEST_CASE("fused_loss") {
    CHECK(fused_loss(report(0, 3, 1.3), 12, 1e-8) == 1.3);
    CHECK(fused_loss(report(0, 3, 0.7, 0.7), 12, 1e-8) == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(std::abs(fused_loss(report(0, 3, 2.0, 0.5), 12, 1e-8) - 0.575) < 1e-9);
}

TEST_CASE("client_weights worked examples") {
    AggregationConfig cfg;
    std::vector<ClientReport> one{report(0, 5, 0.9)};
    CHECK(client_weights(one, 12, cfg)[0].w == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<ClientReport> two{report(0, 2, 1.0), report(1, 4, 1.0)};
    auto w = client_weights(two, 12, cfg);
    CHECK(w[0].w == doctest::Approx(1.0 / 6).epsilon(1e-12));
    CHECK(w[1].w == doctest::Approx(1.0 / 3).epsilon(1e-12));

    AggregationConfig tiny;
    tiny.epsilon = 1e-15;
    std::vector<ClientReport> losses{report(0, 4, 1.0), report(1, 4, 3.0)};
    w = client_weights(losses, 12, tiny);
    CHECK(w[0].w == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(w[1].w == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("aggregate_layer worked examples") {
    auto t1 = scalar_layer(3.0), t2 = scalar_layer(6.0), s = scalar_layer(0.0);
    std::vector<LayerContribution> c{{&t1, 1.0 / 6}, {&t2, 1.0 / 3}};
    auto out = aggregate_layer(c, s, 0.01);
    CHECK(out.weights[0] == doctest::Approx(2.5 / 0.51).epsilon(1e-12));
    CHECK(out.weights[0] == doctest::Approx(4.901961).epsilon(1e-6));

    std::vector<LayerContribution> single{{&t1, 1.0}};
    CHECK(aggregate_layer(single, s, 0.0) == t1);

    auto big = aggregate_layer(c, scalar_layer(-2.0), 1e9);
    CHECK(std::abs(big.weights[0] + 2.0) < 1e-6 * 2.0);

    CHECK(aggregate_layer({}, s, 0.01) == s);
    CHECK_THROWS_AS(aggregate_layer(c, s, -1.0), InputError);
    auto wrong = DenseLayer(Tensor::matrix(1, 2, {0, 0}), Tensor::vector({0}), Activation::ReLU);
    std::vector<LayerContribution> bad{{&wrong, 1.0}};
    CHECK_THROWS_AS(aggregate_layer(bad, s, 0.01), StructuralError);
}

TEST_CASE("aggregate_layer equals the numeric minimiser and stays in the convex hull") {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<int> count(1, 5);
    std::uniform_real_distribution<double> wdist(0.0, 1.0), ldist(0.0, 0.5);
    for (int inst = 0; inst < 100; ++inst) {
        const int n = count(rng);
        std::vector<DenseLayer> thetas;
        std::vector<double> weights;
        for (int i = 0; i < n; ++i) {
            thetas.push_back(random_layer(3, 1, rng));  // 4 entries
            weights.push_back(wdist(rng));
        }
        const auto server = random_layer(3, 1, rng);
        const double lambda = inst % 10 == 0 ? 0.0 : ldist(rng);
        std::vector<LayerContribution> c;
        std::vector<std::vector<double>> flat;
        for (int i = 0; i < n; ++i) {
            c.push_back({&thetas[i], weights[i]});
            flat.push_back(flatten(thetas[i]));
        }
        const auto got = flatten(aggregate_layer(c, server, lambda));
        const auto want = numeric_minimizer_oracle(flat, weights, flatten(server), lambda);
        for (std::size_t k = 0; k < got.size(); ++k) {
            CHECK(std::abs(got[k] - want[k]) < 1e-6);
            double lo = flatten(server)[k], hi = lo;
            for (const auto& f : flat) {
                lo = std::min(lo, f[k]);
                hi = std::max(hi, f[k]);
            }
            const double slack = 1e-12 * (1.0 + std::abs(lo) + std::abs(hi));  // rounding only
            CHECK(got[k] >= lo - slack);
            CHECK(got[k] <= hi + slack);
        }
        // Consensus is a fixed point.
        std::vector<DenseLayer> copies(static_cast<std::size_t>(n), server);
        std::vector<LayerContribution> cc;
        for (int i = 0; i < n; ++i) cc.push_back({&copies[i], weights[i]});
        CHECK(aggregate_layer(cc, server, lambda) == server);
    }
}

TEST_CASE("numeric minimiser special cases") {
    std::vector<std::vector<double>> one{{1.5, -2.0}};
    std::vector<double> w1{0.7};
    auto r = numeric_minimizer_oracle(one, w1, {0.0, 0.0}, 0.0);
    CHECK(r[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(r[1] == doctest::Approx(-2.0).epsilon(1e-9));
    std::vector<std::vector<double>> two{{1.0}, {4.0}};
    std::vector<double> w2{0.3, 0.3};
    CHECK(numeric_minimizer_oracle(two, w2, {100.0}, 0.0)[0] == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("aggregate_round per-layer contributor sets") {
    auto net = build_supernet({3, 4, 4, 4, 4}, 2, 9);  // L = 4
    std::mt19937_64 rng(10);
    auto r1 = report(1, 1, 1.0);
    auto r2 = report(2, 3, 1.0);
    for (auto* r : {&r1, &r2}) {
        r->encoder = slice_prefix(net, r->depth);
        for (auto& l : r->encoder) l.weights = testutil::random_tensor(l.weights.shape(), rng);
    }
    const SuperNet before = net;
    AggregationConfig cfg;
    std::vector<ClientReport> reports{r1, r2};
    auto res = aggregate_round(reports, net, cfg);
    REQUIRE(res.weights.size() == 2);
    const double w2 = res.weights[1].w;
    CHECK(res.contributors_per_layer == std::vector<std::size_t>{2, 1, 1, 0});

    // Layer 2 comes from client 2 only, pulled toward the server copy.
    const auto& got = net.encoder()[1].weights;
    for (std::size_t k = 0; k < got.size(); ++k) {
        const double want = (w2 * r2.encoder[1].weights[k] + cfg.lambda * before.encoder()[1].weights[k]) / (w2 + cfg.lambda);
        CHECK(got[k] == doctest::Approx(want).epsilon(1e-12));
    }
    // No one holds layer 4: bitwise server value. Heads untouched.
    CHECK(net.encoder()[3] == before.encoder()[3]);
    CHECK(net.classifier() == before.classifier());
}

TEST_CASE("aggregate_round is invariant to report order and rejects misaligned prefixes") {
    auto net = build_supernet({3, 5, 5, 5, 5, 5}, 3, 2);
    std::mt19937_64 rng(12);
    std::vector<ClientReport> reports;
    std::uniform_real_distribution<double> loss(0.1, 3.0);
    for (std::size_t i = 0; i < 6; ++i) {
        auto r = report(i, 1 + i % 4, loss(rng), i % 2 ? std::optional<double>(loss(rng)) : std::nullopt);
        r.encoder = slice_prefix(net, r.depth);
        for (auto& l : r.encoder) l.weights = testutil::random_tensor(l.weights.shape(), rng);
        reports.push_back(r);
    }
    auto bad = report(99, 2, 1.0);
    bad.encoder = slice_prefix(net, 1);
    reports.push_back(bad);

    SuperNet a = net, b = net;
    auto ra = aggregate_round(reports, a, {});
    std::reverse(reports.begin(), reports.end());
    aggregate_round(reports, b, {});
    std::rotate(reports.begin(), reports.begin() + 3, reports.end());
    SuperNet c = net;
    aggregate_round(reports, c, {});
    CHECK(a == b);
    CHECK(a == c);
    CHECK(ra.rejected == std::vector<std::size_t>{99});
}

TEST_CASE("aggregate_round fixed point when everyone holds the server values") {
    auto net = build_supernet({3, 5, 5, 5}, 3, 2);
    std::vector<ClientReport> reports;
    for (std::size_t i = 0; i < 4; ++i) {
        auto r = report(i, 1 + i % 2, 0.5 + i, 0.3);
        r.encoder = slice_prefix(net, r.depth);
        reports.push_back(r);
    }
    const SuperNet before = net;
    aggregate_round(reports, net, {});
    CHECK(net == before);
}

TEST_CASE("renormalised weights sum to one per layer") {
    auto net = build_supernet({2, 3, 3, 3}, 2, 5);
    std::mt19937_64 rng(1);
    auto r1 = report(0, 2, 1.0), r2 = report(1, 2, 2.0);
    for (auto* r : {&r1, &r2}) {
        r->encoder = slice_prefix(net, 2);
        for (auto& l : r->encoder) l.weights = testutil::random_tensor(l.weights.shape(), rng);
    }
    AggregationConfig cfg;
    cfg.renormalize_weights = true;
    cfg.lambda = 0.0;
    std::vector<ClientReport> reports{r1, r2};
    SuperNet n = net;
    auto res = aggregate_round(reports, n, cfg);
    const double s = res.weights[0].w + res.weights[1].w;
    const double k = res.weights[0].w / s;
    CHECK(n.encoder()[0].weights[0] == doctest::Approx(k * r1.encoder[0].weights[0] + (1 - k) * r2.encoder[0].weights[0]));
}

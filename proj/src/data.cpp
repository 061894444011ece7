#include "ssfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ssfl/errors.hpp"
#include "ssfl/rng.hpp"

namespace ssfl {

Dataset generate_dataset(std::size_t num_classes, std::size_t dim, std::size_t count,
                         double cluster_spread, std::uint64_t seed) {
    if (num_classes < 2 || dim < 2) throw InputError("dataset needs C >= 2 and D >= 2");
    if (count < 10 * num_classes) throw InputError("dataset needs N >= 10*C");
    if (cluster_spread < 0.0) throw InputError("cluster spread must be non-negative");

    auto rng = make_rng(seed, stream::kDataset);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> means(num_classes * dim);
    for (double& m : means) m = normal(rng);

    Dataset ds;
    ds.num_classes = num_classes;
    ds.features = Tensor({count, dim});
    ds.labels.resize(count);
    // Round-robin labels, shuffled: class counts differ by at most one.
    for (std::size_t n = 0; n < count; ++n) ds.labels[n] = static_cast<int>(n % num_classes);
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
    for (std::size_t n = 0; n < count; ++n) {
        const int y = ds.labels[n];
        for (std::size_t k = 0; k < dim; ++k) {
            ds.features.at(n, k) = means[static_cast<std::size_t>(y) * dim + k] + cluster_spread * normal(rng);
        }
    }
    return ds;
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
    Dataset out;
    out.num_classes = ds.num_classes;
    if (indices.empty()) return out;
    const std::size_t d = ds.dim();
    out.features = Tensor({indices.size(), d});
    out.labels.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto src = indices[r];
        for (std::size_t k = 0; k < d; ++k) out.features.at(r, k) = ds.features.at(src, k);
        out.labels.push_back(ds.labels[src]);
    }
    return out;
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
    auto sub = subset(ds, indices);
    return {std::move(sub.features), std::move(sub.labels)};
}

TrainTestSplit split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("test fraction must be in (0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed, stream::kTestSplit);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::round(test_fraction * static_cast<double>(ds.size())));
    if (n_test == 0 || n_test == ds.size()) throw InputError("test split would be empty");
    std::span<const std::size_t> all(order);
    return {subset(ds, all.subspan(n_test)), subset(ds, all.first(n_test))};
}

std::vector<Shard> dirichlet_partition(const Dataset& ds, std::size_t num_clients,
                                       double concentration, std::uint64_t seed,
                                       std::size_t min_per_client) {
    if (num_clients == 0) throw InputError("need at least one client");
    if (!(concentration > 0.0)) throw InputError("Dirichlet concentration must be positive");

    std::vector<Shard> shards(num_clients);
    for (std::size_t i = 0; i < num_clients; ++i) shards[i].client_id = i;

    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t n = 0; n < ds.size(); ++n) by_class[static_cast<std::size_t>(ds.labels[n])].push_back(n);

    auto rng = make_rng(seed, stream::kPartition);
    std::gamma_distribution<double> gamma(concentration, 1.0);
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        std::vector<double> share(num_clients);
        double total = 0.0;
        for (double& s : share) {
            s = gamma(rng);
            total += s;
        }
        if (!(total > 0.0)) {
            // Every draw underflowed (tiny concentration); give the class to one client.
            std::fill(share.begin(), share.end(), 0.0);
            share[std::uniform_int_distribution<std::size_t>(0, num_clients - 1)(rng)] = 1.0;
            total = 1.0;
        }
        const double n = static_cast<double>(members.size());
        double cumulative = 0.0;
        std::size_t begin = 0;
        for (std::size_t i = 0; i < num_clients; ++i) {
            cumulative += share[i] / total;
            std::size_t end = i + 1 == num_clients
                                  ? members.size()
                                  : std::min(members.size(), static_cast<std::size_t>(std::llround(cumulative * n)));
            end = std::max(end, begin);
            shards[i].indices.insert(shards[i].indices.end(), members.begin() + static_cast<std::ptrdiff_t>(begin),
                                     members.begin() + static_cast<std::ptrdiff_t>(end));
            begin = end;
        }
    }

    if (min_per_client > 0 && min_per_client * num_clients <= ds.size()) {
        while (true) {
            auto small = std::min_element(shards.begin(), shards.end(), [](const auto& a, const auto& b) {
                return a.indices.size() < b.indices.size();
            });
            if (small->indices.size() >= min_per_client) break;
            auto large = std::max_element(shards.begin(), shards.end(), [](const auto& a, const auto& b) {
                return a.indices.size() < b.indices.size();
            });
            small->indices.push_back(large->indices.back());
            large->indices.pop_back();
        }
    }
    for (auto& s : shards) std::sort(s.indices.begin(), s.indices.end());
    return shards;
}

std::vector<std::size_t> class_histogram(const Dataset& ds, std::span<const std::size_t> indices) {
    std::vector<std::size_t> h(ds.num_classes, 0);
    for (auto i : indices) ++h[static_cast<std::size_t>(ds.labels[i])];
    return h;
}

}  // namespace ssfl

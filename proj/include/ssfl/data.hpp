#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssfl/tensor.hpp"
#include "ssfl/tpgf.hpp"

namespace ssfl {

struct Dataset {
    Tensor features;  // [N, D]
    std::vector<int> labels;
    std::size_t num_classes = 0;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

/// Gaussian class clusters: class means drawn from N(0, I), samples are the
/// class mean plus N(0, spread^2 I) noise. Labels are balanced: each class
/// gets floor(N/C) or ceil(N/C) rows, in shuffled order.
Dataset generate_dataset(std::size_t num_classes, std::size_t dim, std::size_t count,
                         double cluster_spread, std::uint64_t seed);

/// Rows `indices` of `ds`, in that order.
Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);
Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
};

/// IID hold-out split after a seeded shuffle.
TrainTestSplit split_train_test(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct Shard {
    std::size_t client_id = 0;
    std::vector<std::size_t> indices;
};

/// For each class, client proportions are drawn from a symmetric
/// Dirichlet(concentration) and that class's samples are dealt out
/// accordingly. Shards are disjoint and cover every index. When
/// min_per_client > 0, samples are moved from the largest shards until every
/// client holds at least that many (if the dataset allows).
std::vector<Shard> dirichlet_partition(const Dataset& ds, std::size_t num_clients,
                                       double concentration, std::uint64_t seed,
                                       std::size_t min_per_client = 0);

/// Per-class counts of the rows in `indices`.
std::vector<std::size_t> class_histogram(const Dataset& ds, std::span<const std::size_t> indices);

}  // namespace ssfl

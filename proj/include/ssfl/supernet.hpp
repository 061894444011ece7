#pragma once

// The weight-sharing global model. Clients hold contiguous prefixes of the
// encoder; the server holds all of it plus its own classifier.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ssfl/nn.hpp"

namespace ssfl {

class SuperNet {
public:
    SuperNet() = default;
    SuperNet(std::vector<DenseLayer> encoder, DenseLayer classifier);

    /// Number of encoder layers, L.
    std::size_t depth() const { return layers_.size() - 1; }
    std::size_t num_classes() const { return layers_.back().out_dim(); }
    std::size_t input_dim() const { return layers_.front().in_dim(); }

    std::span<const DenseLayer> encoder() const { return {layers_.data(), depth()}; }
    std::span<DenseLayer> encoder() { return {layers_.data(), depth()}; }
    const DenseLayer& classifier() const { return layers_.back(); }
    DenseLayer& classifier() { return layers_.back(); }

    /// Encoder layers from 0-based index `from` through the classifier. This
    /// is what the server runs for a client whose prefix has `from` layers.
    std::span<const DenseLayer> suffix_with_classifier(std::size_t from) const;
    std::span<DenseLayer> suffix_with_classifier(std::size_t from);

    /// Full encoder followed by the classifier.
    std::span<const DenseLayer> all_layers() const { return layers_; }

    friend bool operator==(const SuperNet&, const SuperNet&) = default;

private:
    std::vector<DenseLayer> layers_;  // encoder..., classifier
};

/// A client's local classifier on top of its prefix.
struct ClientHead {
    DenseLayer layer;

    friend bool operator==(const ClientHead&, const ClientHead&) = default;
};

/// layer_dims = [input, h1, ..., hL]; needs L >= 2.
SuperNet build_supernet(const std::vector<std::size_t>& layer_dims, std::size_t num_classes,
                        std::uint64_t seed);

/// Deep copy of encoder layers 1..d (1 <= d <= L-1).
std::vector<DenseLayer> slice_prefix(const SuperNet& net, std::size_t depth);

ClientHead make_client_head(const SuperNet& net, std::size_t depth, std::size_t num_classes,
                            std::uint64_t seed);

/// True iff `prefix` has exactly `depth` layers whose shapes match the global
/// layers 1..depth.
bool check_alignment(const SuperNet& net, std::span<const DenseLayer> prefix, std::size_t depth);

// Checkpoint format (little-endian):
//   "SSFLCKPT" | u32 version | u32 layer_count
//   per layer: u32 out | u32 in | u8 activation | f64 weights[out*in] | f64 bias[out]
// The last layer is the server classifier. Doubles are stored bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const SuperNet& net, std::ostream& out);
SuperNet load_checkpoint(std::istream& in);
void save_checkpoint(const SuperNet& net, const std::filesystem::path& path);
SuperNet load_checkpoint(const std::filesystem::path& path);

}  // namespace ssfl

#include "ssfl/supernet.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "ssfl/errors.hpp"
#include "ssfl/rng.hpp"

namespace ssfl {

SuperNet::SuperNet(std::vector<DenseLayer> encoder, DenseLayer classifier) {
    if (encoder.size() < 2) throw StructuralError("supernet needs at least two encoder layers");
    for (std::size_t l = 1; l < encoder.size(); ++l) {
        if (encoder[l].in_dim() != encoder[l - 1].out_dim()) {
            throw StructuralError("encoder layer " + std::to_string(l + 1) +
                                  " does not chain onto layer " + std::to_string(l));
        }
    }
    if (classifier.in_dim() != encoder.back().out_dim()) {
        throw StructuralError("classifier input does not match the last encoder layer");
    }
    if (classifier.activation != Activation::Identity) {
        throw StructuralError("classifier must use the identity activation");
    }
    layers_ = std::move(encoder);
    layers_.push_back(std::move(classifier));
}

std::span<const DenseLayer> SuperNet::suffix_with_classifier(std::size_t from) const {
    if (from > depth()) throw InputError("suffix start beyond the encoder");
    return std::span<const DenseLayer>(layers_).subspan(from);
}

std::span<DenseLayer> SuperNet::suffix_with_classifier(std::size_t from) {
    if (from > depth()) throw InputError("suffix start beyond the encoder");
    return std::span<DenseLayer>(layers_).subspan(from);
}

SuperNet build_supernet(const std::vector<std::size_t>& layer_dims, std::size_t num_classes,
                        std::uint64_t seed) {
    if (layer_dims.size() < 3) {
        throw StructuralError("layer_dims needs an input width and at least two encoder widths");
    }
    if (num_classes < 2) throw InputError("need at least two classes");
    auto rng = make_rng(seed, stream::kModelInit);
    std::vector<DenseLayer> encoder;
    for (std::size_t l = 1; l < layer_dims.size(); ++l) {
        encoder.push_back(make_dense(layer_dims[l - 1], layer_dims[l], Activation::ReLU, rng));
    }
    auto classifier = make_dense(layer_dims.back(), num_classes, Activation::Identity, rng);
    return SuperNet(std::move(encoder), std::move(classifier));
}

namespace {
void check_depth(const SuperNet& net, std::size_t depth) {
    if (depth < 1 || depth + 1 > net.depth()) {
        throw InputError("client depth " + std::to_string(depth) + " outside [1, " +
                         std::to_string(net.depth() - 1) + "]");
    }
}
}  // namespace

std::vector<DenseLayer> slice_prefix(const SuperNet& net, std::size_t depth) {
    check_depth(net, depth);
    auto enc = net.encoder();
    return {enc.begin(), enc.begin() + static_cast<std::ptrdiff_t>(depth)};
}

ClientHead make_client_head(const SuperNet& net, std::size_t depth, std::size_t num_classes,
                            std::uint64_t seed) {
    check_depth(net, depth);
    auto rng = make_rng(seed, stream::kHeadInit);
    return {make_dense(net.encoder()[depth - 1].out_dim(), num_classes, Activation::Identity, rng)};
}

bool check_alignment(const SuperNet& net, std::span<const DenseLayer> prefix, std::size_t depth) {
    if (depth < 1 || depth > net.depth() || prefix.size() != depth) return false;
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& g = net.encoder()[l];
        if (!prefix[l].weights.same_shape(g.weights) || !prefix[l].bias.same_shape(g.bias) ||
            prefix[l].activation != g.activation) {
            return false;
        }
    }
    return true;
}

namespace {

constexpr std::array<char, 8> kMagic{'S', 'S', 'F', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T get(std::istream& in) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), bytes.size())) throw StructuralError("checkpoint truncated");
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace

void save_checkpoint(const SuperNet& net, std::ostream& out) {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kCheckpointVersion);
    const auto layers = net.all_layers();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto& layer : layers) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.out_dim()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.in_dim()));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
        for (double v : layer.weights.values()) put<double>(out, v);
        for (double v : layer.bias.values()) put<double>(out, v);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint");
}

SuperNet load_checkpoint(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw StructuralError("not a supernet checkpoint");
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        throw StructuralError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = get<std::uint32_t>(in);
    if (count < 3) throw StructuralError("checkpoint holds too few layers");
    std::vector<DenseLayer> layers;
    for (std::uint32_t l = 0; l < count; ++l) {
        const auto out_dim = get<std::uint32_t>(in);
        const auto in_dim = get<std::uint32_t>(in);
        const auto act = get<std::uint8_t>(in);
        if (act > 1) throw StructuralError("checkpoint layer has unknown activation");
        Tensor w({out_dim, in_dim});
        for (double& v : w.values()) v = get<double>(in);
        Tensor b({out_dim});
        for (double& v : b.values()) v = get<double>(in);
        layers.emplace_back(std::move(w), std::move(b), static_cast<Activation>(act));
    }
    DenseLayer classifier = std::move(layers.back());
    layers.pop_back();
    return SuperNet(std::move(layers), std::move(classifier));
}

void save_checkpoint(const SuperNet& net, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    save_checkpoint(net, out);
}

SuperNet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return load_checkpoint(in);
}

}  // namespace ssfl

#pragma once

// Experiment configuration: one struct holding every knob of a run, JSON
// (de)serialisation with validation, and the named preset catalogue.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ssfl/aggregation.hpp"
#include "ssfl/allocation.hpp"
#include "ssfl/tpgf.hpp"

namespace ssfl {

enum class Mode { SSFL, SFL, Local };

struct DatasetConfig {
    std::size_t num_classes = 10;
    std::size_t dim = 16;
    std::size_t count = 4000;
    double spread = 0.8;
    double test_fraction = 0.2;

    friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct PartitionConfig {
    double concentration = 0.5;
    std::size_t min_samples = 0;

    friend bool operator==(const PartitionConfig&, const PartitionConfig&) = default;
};

struct AllocationSettings {
    double alpha = 0.5;
    double beta = 4.0;
    double epsilon = 1e-8;
    ProfileRanges ranges;
    /// Explicit per-client profiles; when non-empty they replace sampling
    /// and must number exactly num_clients.
    std::vector<ClientProfile> profiles;

    friend bool operator==(const AllocationSettings&, const AllocationSettings&) = default;
};

struct TpgfSettings {
    double tau = 0.5;
    double eta = 0.05;
    double epsilon = 1e-8;
    double timeout_s = 5.0;
    FusionRule fusion_rule = FusionRule::Full;

    friend bool operator==(const TpgfSettings&, const TpgfSettings&) = default;
};

struct AggregationSettings {
    double lambda = 0.01;
    double epsilon = 1e-8;
    bool renormalize_weights = false;
    /// Overwrite a reconnecting client's prefix with the global one before
    /// its next full step, instead of keeping fallback progress until the
    /// next aggregation.
    bool resync_on_reconnect = false;

    friend bool operator==(const AggregationSettings&, const AggregationSettings&) = default;
};

struct ExperimentConfig {
    Mode mode = Mode::SSFL;
    std::size_t num_clients = 10;
    std::size_t rounds = 40;
    std::size_t steps_per_round = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
    std::vector<std::size_t> layer_dims{16, 32, 32, 32, 32, 32, 32};
    DatasetConfig dataset;
    PartitionConfig partition;
    AllocationSettings allocation;
    TpgfSettings tpgf;
    AggregationSettings aggregation;
    double availability = 1.0;
    /// Uniform split depth for the SFL baseline; 0 means floor(L/2).
    std::size_t sfl_split_depth = 0;
    double compute_seconds_per_flop = 1e-9;
    /// Accuracy the summary reports rounds-to-target for; unset = none.
    std::optional<double> target_accuracy;

    std::size_t encoder_depth() const { return layer_dims.empty() ? 0 : layer_dims.size() - 1; }
    std::size_t effective_sfl_depth() const;
    TpgfConfig tpgf_config() const;
    AggregationConfig aggregation_config() const;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

std::string to_string(Mode m);
std::string to_string(FusionRule r);
Mode parse_mode(const std::string& s);
FusionRule parse_fusion_rule(const std::string& s);

/// Throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Applies `j` on top of `base`. Unknown keys and wrong types are errors;
/// `origin` prefixes error messages (usually the file path).
ExperimentConfig from_json(const nlohmann::json& j, const ExperimentConfig& base = {},
                           const std::string& origin = "config");

/// key=value with a dotted key, e.g. "aggregation.lambda=0.02". The value is
/// read as JSON when it parses, otherwise as a string.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Reads a JSON config file (empty file = defaults), applies overrides in
/// order, validates.
ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::string>& overrides = {});

struct Preset {
    std::string name;
    std::string description;
    /// (label, config) for every run the preset performs.
    std::vector<std::pair<std::string, ExperimentConfig>> runs;
};

/// The seed set the multi-seed presets use.
std::vector<std::uint64_t> preset_seeds();

std::vector<Preset> preset_catalog();
const Preset& find_preset(const std::string& name);

}  // namespace ssfl

#pragma once

// Command implementations behind the `ssfl` executable. They print to the
// given stream and return a process exit status.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssfl/config.hpp"
#include "ssfl/report.hpp"
#include "ssfl/sim.hpp"

namespace ssfl {

struct RunOptions {
    std::filesystem::path out_stem = "metrics";
    bool write_audit = false;
};

int run_command(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out);

/// Depth assignment for a config's sampled profiles.
struct AllocationRow {
    std::size_t client = 0;
    double memory_gb = 0.0;
    double latency_ms = 0.0;
    std::size_t depth = 0;
    std::size_t shard_size = 0;
};

std::vector<AllocationRow> allocation_table(const ExperimentConfig& cfg);
void print_allocation_table(const std::vector<AllocationRow>& rows, std::size_t total_layers,
                            std::ostream& out);
void write_allocation_csv(const std::vector<AllocationRow>& rows, const std::filesystem::path& path);

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for fewer than 2 values
};

MeanStd mean_std(const std::vector<double>& values);

/// Runs every configuration of a preset, writes <out_dir>/<preset>/<label>.*
/// metrics files and prints the preset's comparison table.
int run_preset(const std::string& name, const std::filesystem::path& out_dir, std::ostream& out);

void list_presets(std::ostream& out);

}  // namespace ssfl

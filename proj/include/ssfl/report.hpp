#pragma once

// Metrics files and summary tables.
//
// CSV column order (stable):
//   round,mode,test_accuracy,cumulative_bytes_up,cumulative_bytes_down,
//   cumulative_broadcast_bytes,simulated_time_s,fallback_step_count,
//   mean_client_loss,mean_server_loss,client_test_accuracy
// Missing values are written as empty CSV fields and JSON nulls. The JSONL
// file carries one object per round with the same keys in the same order.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssfl/sim.hpp"

namespace ssfl {

extern const std::vector<std::string> kMetricsColumns;

void write_metrics_csv(const std::vector<RoundMetrics>& rounds, std::ostream& out);
void write_metrics_jsonl(const std::vector<RoundMetrics>& rounds, std::ostream& out);
void write_audit_jsonl(const std::vector<ClientAudit>& audit, std::ostream& out);

/// Writes <stem>.csv and <stem>.jsonl (and <stem>.audit.jsonl if asked).
void write_metrics_files(const ExperimentResult& result, const std::filesystem::path& stem,
                         bool with_audit = false);

/// FNV-1a over a file's bytes, as hex.
std::string file_checksum(const std::filesystem::path& path);

/// First round whose accuracy reaches `target`.
std::optional<std::size_t> rounds_to_target(const std::vector<RoundMetrics>& rounds, double target);

inline constexpr double kBytesPerMB = 1'000'000.0;

struct RunSummary {
    std::string label;
    std::optional<std::size_t> rounds_to_target;
    std::optional<double> mb_at_target;
    std::optional<double> seconds_at_target;
    double total_mb = 0.0;
    double total_seconds = 0.0;
    double final_accuracy = 0.0;
};

RunSummary summarize(const std::string& label, const ExperimentResult& result,
                     std::optional<double> target);

/// Table with rounds-to-target, MB, simulated seconds and final accuracy.
/// Unreached targets print as "not reached".
void print_summary_table(const std::vector<RunSummary>& rows, std::optional<double> target,
                         std::ostream& out);

}  // namespace ssfl

#include "ssfl/report.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace ssfl {

const std::vector<std::string> kMetricsColumns{
    "round",
    "mode",
    "test_accuracy",
    "cumulative_bytes_up",
    "cumulative_bytes_down",
    "cumulative_broadcast_bytes",
    "simulated_time_s",
    "fallback_step_count",
    "mean_client_loss",
    "mean_server_loss",
    "client_test_accuracy",
};

namespace {

std::string fmt_real(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_real(*v) : std::string(); }

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void write_metrics_csv(const std::vector<RoundMetrics>& rounds, std::ostream& out) {
    for (std::size_t i = 0; i < kMetricsColumns.size(); ++i) out << (i ? "," : "") << kMetricsColumns[i];
    out << '\n';
    for (const auto& m : rounds) {
        out << m.round << ',' << to_string(m.mode) << ',' << fmt_real(m.test_accuracy) << ','
            << m.cumulative_bytes_up << ',' << m.cumulative_bytes_down << ',' << m.cumulative_broadcast_bytes
            << ',' << fmt_real(m.simulated_time_s) << ',' << m.fallback_step_count << ','
            << fmt_opt(m.mean_client_loss) << ',' << fmt_opt(m.mean_server_loss) << ','
            << fmt_opt(m.client_test_accuracy) << '\n';
    }
}

void write_metrics_jsonl(const std::vector<RoundMetrics>& rounds, std::ostream& out) {
    for (const auto& m : rounds) {
        nlohmann::ordered_json j;
        j["round"] = m.round;
        j["mode"] = to_string(m.mode);
        j["test_accuracy"] = m.test_accuracy;
        j["cumulative_bytes_up"] = m.cumulative_bytes_up;
        j["cumulative_bytes_down"] = m.cumulative_bytes_down;
        j["cumulative_broadcast_bytes"] = m.cumulative_broadcast_bytes;
        j["simulated_time_s"] = m.simulated_time_s;
        j["fallback_step_count"] = m.fallback_step_count;
        j["mean_client_loss"] = opt_json(m.mean_client_loss);
        j["mean_server_loss"] = opt_json(m.mean_server_loss);
        j["client_test_accuracy"] = opt_json(m.client_test_accuracy);
        out << j.dump() << '\n';
    }
}

void write_audit_jsonl(const std::vector<ClientAudit>& audit, std::ostream& out) {
    for (const auto& a : audit) {
        nlohmann::ordered_json j;
        j["round"] = a.round;
        j["client"] = a.client;
        j["depth"] = a.depth;
        j["full_steps"] = a.full_steps;
        j["fallback_steps"] = a.fallback_steps;
        j["stalled_steps"] = a.stalled_steps;
        j["client_loss"] = opt_json(a.client_loss);
        j["server_loss"] = opt_json(a.server_loss);
        j["weight"] = a.weight;
        out << j.dump() << '\n';
    }
}

void write_metrics_files(const ExperimentResult& result, const std::filesystem::path& stem, bool with_audit) {
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    auto open = [](const std::filesystem::path& p) {
        std::ofstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + p.string());
        return f;
    };
    {
        auto f = open(stem.string() + ".csv");
        write_metrics_csv(result.rounds, f);
    }
    {
        auto f = open(stem.string() + ".jsonl");
        write_metrics_jsonl(result.rounds, f);
    }
    if (with_audit) {
        auto f = open(stem.string() + ".audit.jsonl");
        write_audit_jsonl(result.audit, f);
    }
}

std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

std::optional<std::size_t> rounds_to_target(const std::vector<RoundMetrics>& rounds, double target) {
    for (const auto& m : rounds) {
        if (m.test_accuracy >= target) return m.round;
    }
    return std::nullopt;
}

RunSummary summarize(const std::string& label, const ExperimentResult& result, std::optional<double> target) {
    RunSummary s;
    s.label = label;
    if (!result.rounds.empty()) {
        const auto& last = result.rounds.back();
        s.total_mb = static_cast<double>(last.cumulative_bytes()) / kBytesPerMB;
        s.total_seconds = last.simulated_time_s;
        s.final_accuracy = last.test_accuracy;
    }
    if (target) {
        s.rounds_to_target = rounds_to_target(result.rounds, *target);
        if (s.rounds_to_target) {
            const auto& m = result.rounds[*s.rounds_to_target - 1];
            s.mb_at_target = static_cast<double>(m.cumulative_bytes()) / kBytesPerMB;
            s.seconds_at_target = m.simulated_time_s;
        }
    }
    return s;
}

void print_summary_table(const std::vector<RunSummary>& rows, std::optional<double> target, std::ostream& out) {
    out << "# MB = 1,000,000 bytes (up + down + broadcast); time is simulated seconds\n";
    if (target) out << "# target accuracy: " << std::fixed << std::setprecision(4) << *target << '\n';
    out << std::left << std::setw(24) << "run" << std::right << std::setw(14) << "rounds@target"
        << std::setw(14) << "MB@target" << std::setw(14) << "s@target" << std::setw(12) << "total MB"
        << std::setw(12) << "total s" << std::setw(11) << "final acc" << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(24) << r.label << std::right;
        if (r.rounds_to_target) {
            out << std::setw(14) << *r.rounds_to_target << std::setw(14) << std::fixed << std::setprecision(3)
                << *r.mb_at_target << std::setw(14) << std::setprecision(1) << *r.seconds_at_target;
        } else {
            out << std::setw(14) << (target ? "not reached" : "-") << std::setw(14) << "-" << std::setw(14) << "-";
        }
        out << std::setw(12) << std::fixed << std::setprecision(3) << r.total_mb << std::setw(12)
            << std::setprecision(1) << r.total_seconds << std::setw(11) << std::setprecision(4) << r.final_accuracy
            << '\n';
    }
}

}  // namespace ssfl

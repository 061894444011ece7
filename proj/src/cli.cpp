#include "ssfl/cli.hpp"

#include <cmath>
#include <functional>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ssfl/allocation.hpp"

namespace ssfl {

namespace {

std::string format_optional(const std::optional<double>& v, int precision) {
    if (!v) return "-";
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << *v;
    return s.str();
}

struct LabeledResult {
    std::string label;
    ExperimentConfig cfg;
    ExperimentResult result;
};

std::vector<LabeledResult> execute_runs(const Preset& preset, const std::filesystem::path& dir,
                                        std::ostream& out) {
    std::filesystem::create_directories(dir);
    std::vector<LabeledResult> results;
    for (const auto& [label, cfg] : preset.runs) {
        out << "  running " << label << " ..." << std::flush;
        auto r = run_experiment(cfg);
        write_metrics_files(r, dir / label);
        out << " final acc " << std::fixed << std::setprecision(4) << r.rounds.back().test_accuracy << '\n';
        results.push_back({label, cfg, std::move(r)});
    }
    return results;
}

void report_table1(const std::vector<LabeledResult>& results, std::ostream& out) {
    std::map<std::size_t, std::map<std::uint64_t, std::map<Mode, const LabeledResult*>>> groups;
    for (const auto& r : results) groups[r.cfg.num_clients][r.cfg.seed][r.cfg.mode] = &r;

    for (const auto& [clients, by_seed] : groups) {
        out << "\n== " << clients << " clients ==\n";
        std::size_t faster = 0, cheaper = 0;
        for (const auto& [seed, by_mode] : by_seed) {
            const auto* ssfl_run = by_mode.at(Mode::SSFL);
            const auto* sfl_run = by_mode.at(Mode::SFL);
            const double target = sfl_run->result.rounds.back().test_accuracy;
            auto a = summarize(ssfl_run->label, ssfl_run->result, target);
            auto b = summarize(sfl_run->label, sfl_run->result, target);
            out << "\nseed " << seed << '\n';
            print_summary_table({a, b}, target, out);
            if (a.rounds_to_target && b.rounds_to_target && *a.rounds_to_target < *b.rounds_to_target) {
                ++faster;
                if (*a.mb_at_target < *b.mb_at_target) ++cheaper;
            }
        }
        out << "\nSSFL reached the SFL final accuracy in fewer rounds in " << faster << "/" << by_seed.size()
            << " seeds (" << cheaper << " also with fewer bytes)\n";
    }
}

void report_grouped(const std::vector<LabeledResult>& results, const std::string& heading,
                    const std::function<std::string(const ExperimentConfig&)>& key, std::ostream& out) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<double>> acc, client_acc;
    for (const auto& r : results) {
        const auto k = key(r.cfg);
        if (!acc.count(k)) order.push_back(k);
        acc[k].push_back(r.result.rounds.back().test_accuracy);
        if (auto c = r.result.rounds.back().client_test_accuracy) client_acc[k].push_back(*c);
    }
    out << '\n' << std::left << std::setw(16) << heading << std::right << std::setw(8) << "runs" << std::setw(12)
        << "mean acc" << std::setw(10) << "std" << std::setw(16) << "client-path acc" << '\n';
    for (const auto& k : order) {
        const auto s = mean_std(acc[k]);
        const auto c = client_acc[k].empty() ? std::optional<double>{} : mean_std(client_acc[k]).mean;
        out << std::left << std::setw(16) << k << std::right << std::setw(8) << acc[k].size() << std::setw(12)
            << std::fixed << std::setprecision(4) << s.mean << std::setw(10) << s.stddev << std::setw(16)
            << format_optional(c, 4) << '\n';
    }
}

}  // namespace

int run_command(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& out) {
    auto result = run_experiment(cfg);
    if (opts.out_stem.has_parent_path()) std::filesystem::create_directories(opts.out_stem.parent_path());
    write_metrics_files(result, opts.out_stem, opts.write_audit);
    out << "mode " << to_string(cfg.mode) << ", " << cfg.num_clients << " clients, " << cfg.rounds
        << " rounds, seed " << cfg.seed << '\n';
    out << "client depths:";
    for (auto d : result.client_depths) out << ' ' << d;
    out << "\n\n";
    print_summary_table({summarize(to_string(cfg.mode), result, cfg.target_accuracy)}, cfg.target_accuracy, out);
    out << "\nmetrics: " << opts.out_stem.string() << ".csv, " << opts.out_stem.string() << ".jsonl\n";
    if (!result.ledger_consistent()) {
        out << "error: communication ledger does not balance\n";
        return 1;
    }
    return 0;
}

std::vector<AllocationRow> allocation_table(const ExperimentConfig& cfg) {
    const auto setup = prepare_experiment(cfg);
    const AllocationConfig alloc{cfg.allocation.alpha, cfg.allocation.beta, cfg.allocation.epsilon,
                                 setup.net.depth()};
    const auto spread = latency_spread(setup.profiles);
    std::vector<AllocationRow> rows;
    for (std::size_t i = 0; i < setup.profiles.size(); ++i) {
        const auto& p = setup.profiles[i];
        rows.push_back({i, p.memory_gb, p.latency_ms, compute_depth(p, spread.min_ms, spread.max_ms, alloc),
                        setup.shards[i].indices.size()});
    }
    return rows;
}

void print_allocation_table(const std::vector<AllocationRow>& rows, std::size_t total_layers, std::ostream& out) {
    out << "# L = " << total_layers << " encoder layers; server runs layers d+1..L plus its classifier\n";
    out << std::setw(8) << "client" << std::setw(12) << "memory GB" << std::setw(14) << "latency ms" << std::setw(8)
        << "depth" << std::setw(14) << "server depth" << std::setw(10) << "samples" << '\n';
    for (const auto& r : rows) {
        out << std::setw(8) << r.client << std::setw(12) << std::fixed << std::setprecision(2) << r.memory_gb
            << std::setw(14) << std::setprecision(1) << r.latency_ms << std::setw(8) << r.depth << std::setw(14)
            << total_layers - r.depth << std::setw(10) << r.shard_size << '\n';
    }
}

void write_allocation_csv(const std::vector<AllocationRow>& rows, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << std::setprecision(17) << "client,memory_gb,latency_ms,depth,shard_size\n";
    for (const auto& r : rows) {
        f << r.client << ',' << r.memory_gb << ',' << r.latency_ms << ',' << r.depth << ',' << r.shard_size << '\n';
    }
}

MeanStd mean_std(const std::vector<double>& values) {
    MeanStd s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

int run_preset(const std::string& name, const std::filesystem::path& out_dir, std::ostream& out) {
    const Preset& preset = find_preset(name);
    const auto dir = out_dir / preset.name;
    out << preset.name << ": " << preset.description << '\n';

    if (preset.name == "allocation-demo") {
        const auto& cfg = preset.runs.front().second;
        const auto rows = allocation_table(cfg);
        std::filesystem::create_directories(dir);
        write_allocation_csv(rows, dir / "allocation.csv");
        print_allocation_table(rows, cfg.encoder_depth(), out);
        return 0;
    }

    const auto results = execute_runs(preset, dir, out);
    bool ledgers_ok = true;
    for (const auto& r : results) ledgers_ok = ledgers_ok && r.result.ledger_consistent();

    if (preset.name == "table1-scaled") {
        report_table1(results, out);
    } else if (preset.name == "ablation-tpgf") {
        report_grouped(results, "fusion rule", [](const ExperimentConfig& c) { return to_string(c.tpgf.fusion_rule); },
                       out);
    } else if (preset.name == "availability-sweep") {
        report_grouped(results, "availability", [](const ExperimentConfig& c) {
            std::ostringstream s;
            s << std::fixed << std::setprecision(2) << c.availability;
            return s.str();
        }, out);
    }
    out << "\nmetrics written to " << dir.string() << '\n';
    if (!ledgers_ok) {
        out << "error: communication ledger does not balance\n";
        return 1;
    }
    return 0;
}

void list_presets(std::ostream& out) {
    for (const auto& p : preset_catalog()) {
        out << std::left << std::setw(20) << p.name << std::right << std::setw(4) << p.runs.size() << " run"
            << (p.runs.size() == 1 ? " " : "s") << "  " << p.description << '\n';
    }
}

}  // namespace ssfl

#include "ssfl/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <set>

#include "ssfl/errors.hpp"

namespace ssfl {

using nlohmann::json;

std::size_t ExperimentConfig::effective_sfl_depth() const {
    return sfl_split_depth == 0 ? encoder_depth() / 2 : sfl_split_depth;
}

TpgfConfig ExperimentConfig::tpgf_config() const {
    TpgfConfig c;
    c.tau = tpgf.tau;
    c.eta = tpgf.eta;
    c.epsilon = tpgf.epsilon;
    c.timeout_s = tpgf.timeout_s;
    c.rule = tpgf.fusion_rule;
    return c;
}

AggregationConfig ExperimentConfig::aggregation_config() const {
    return {aggregation.lambda, aggregation.epsilon, aggregation.renormalize_weights};
}

std::string to_string(Mode m) {
    switch (m) {
        case Mode::SSFL: return "ssfl";
        case Mode::SFL: return "sfl";
        case Mode::Local: return "local";
    }
    return "?";
}

std::string to_string(FusionRule r) {
    switch (r) {
        case FusionRule::Full: return "full";
        case FusionRule::DepthOnly: return "depth_only";
        case FusionRule::LossOnly: return "loss_only";
        case FusionRule::Equal: return "equal";
    }
    return "?";
}

Mode parse_mode(const std::string& s) {
    if (s == "ssfl") return Mode::SSFL;
    if (s == "sfl") return Mode::SFL;
    if (s == "local") return Mode::Local;
    throw ConfigError("mode: expected ssfl, sfl or local, got '" + s + "'");
}

FusionRule parse_fusion_rule(const std::string& s) {
    if (s == "full") return FusionRule::Full;
    if (s == "depth_only") return FusionRule::DepthOnly;
    if (s == "loss_only") return FusionRule::LossOnly;
    if (s == "equal") return FusionRule::Equal;
    throw ConfigError("tpgf.fusion_rule: expected full, depth_only, loss_only or equal, got '" + s + "'");
}

namespace {

[[noreturn]] void range_error(const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) range_error(key, what);
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void validate(const ExperimentConfig& c) {
    require(c.num_clients >= 1, "num_clients", "must be >= 1");
    require(c.rounds >= 1, "rounds", "must be >= 1");
    require(c.steps_per_round >= 1, "steps_per_round", "must be >= 1");
    require(c.batch_size >= 1, "batch_size", "must be >= 1");

    require(c.layer_dims.size() >= 3, "layer_dims", "needs an input width and at least two encoder layers");
    for (auto d : c.layer_dims) require(d >= 1, "layer_dims", "widths must be >= 1");
    require(c.layer_dims.front() == c.dataset.dim, "layer_dims",
            "first entry must equal dataset.dim (" + std::to_string(c.dataset.dim) + ")");

    const auto& d = c.dataset;
    require(d.num_classes >= 2, "dataset.num_classes", "must be >= 2");
    require(d.dim >= 2, "dataset.dim", "must be >= 2");
    require(d.count >= 10 * d.num_classes, "dataset.count", "must be >= 10 * num_classes");
    require(finite(d.spread) && d.spread >= 0.0, "dataset.spread", "must be finite and >= 0");
    require(d.test_fraction > 0.0 && d.test_fraction < 1.0, "dataset.test_fraction", "must lie in (0, 1)");

    require(finite(c.partition.concentration) && c.partition.concentration > 0.0,
            "partition.concentration", "must be > 0");

    const auto& a = c.allocation;
    require(finite(a.alpha) && a.alpha >= 0.0, "allocation.alpha", "must be >= 0");
    require(finite(a.beta) && a.beta >= 0.0, "allocation.beta", "must be >= 0");
    require(finite(a.epsilon) && a.epsilon > 0.0, "allocation.epsilon", "must be > 0");
    require(a.ranges.memory_min_gb > 0.0 && a.ranges.memory_min_gb <= a.ranges.memory_max_gb &&
                finite(a.ranges.memory_max_gb),
            "allocation.memory_min_gb", "memory range must be positive with min <= max");
    require(a.ranges.latency_min_ms > 0.0 && a.ranges.latency_min_ms <= a.ranges.latency_max_ms &&
                finite(a.ranges.latency_max_ms),
            "allocation.latency_min_ms", "latency range must be positive with min <= max");
    if (!a.profiles.empty()) {
        require(a.profiles.size() == c.num_clients, "allocation.profiles",
                "must list exactly num_clients entries");
        for (std::size_t i = 0; i < a.profiles.size(); ++i) {
            const auto& p = a.profiles[i];
            require(finite(p.memory_gb) && p.memory_gb > 0.0 && finite(p.latency_ms) && p.latency_ms > 0.0,
                    "allocation.profiles[" + std::to_string(i) + "]", "memory and latency must be > 0");
        }
    }

    const auto& t = c.tpgf;
    require(finite(t.tau) && t.tau > 0.0, "tpgf.tau", "must be > 0");
    require(finite(t.eta) && t.eta > 0.0, "tpgf.eta", "must be > 0");
    require(finite(t.epsilon) && t.epsilon > 0.0, "tpgf.epsilon", "must be > 0");
    require(finite(t.timeout_s) && t.timeout_s > 0.0, "tpgf.timeout_s", "must be > 0");

    require(finite(c.aggregation.lambda) && c.aggregation.lambda >= 0.0, "aggregation.lambda", "must be >= 0");
    require(finite(c.aggregation.epsilon) && c.aggregation.epsilon > 0.0, "aggregation.epsilon", "must be > 0");

    require(c.availability >= 0.0 && c.availability <= 1.0, "connectivity.availability", "must lie in [0, 1]");
    require(c.sfl_split_depth == 0 || c.sfl_split_depth < c.encoder_depth(), "sfl.split_depth",
            "must be 0 (auto) or in [1, L-1]");
    require(c.encoder_depth() / 2 >= 1 || c.sfl_split_depth != 0, "sfl.split_depth", "auto depth would be 0");
    require(finite(c.compute_seconds_per_flop) && c.compute_seconds_per_flop >= 0.0,
            "sim.compute_seconds_per_flop", "must be >= 0");
    if (c.target_accuracy) {
        require(*c.target_accuracy > 0.0 && *c.target_accuracy <= 1.0, "target_accuracy", "must lie in (0, 1]");
    }
}

json to_json(const ExperimentConfig& c) {
    json profiles = json::array();
    for (const auto& p : c.allocation.profiles) profiles.push_back({{"memory_gb", p.memory_gb}, {"latency_ms", p.latency_ms}});
    return json{
        {"mode", to_string(c.mode)},
        {"num_clients", c.num_clients},
        {"rounds", c.rounds},
        {"steps_per_round", c.steps_per_round},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"layer_dims", c.layer_dims},
        {"dataset",
         {{"num_classes", c.dataset.num_classes},
          {"dim", c.dataset.dim},
          {"count", c.dataset.count},
          {"spread", c.dataset.spread},
          {"test_fraction", c.dataset.test_fraction}}},
        {"partition", {{"concentration", c.partition.concentration}, {"min_samples", c.partition.min_samples}}},
        {"allocation",
         {{"alpha", c.allocation.alpha},
          {"beta", c.allocation.beta},
          {"epsilon", c.allocation.epsilon},
          {"memory_min_gb", c.allocation.ranges.memory_min_gb},
          {"memory_max_gb", c.allocation.ranges.memory_max_gb},
          {"latency_min_ms", c.allocation.ranges.latency_min_ms},
          {"latency_max_ms", c.allocation.ranges.latency_max_ms},
          {"profiles", profiles}}},
        {"tpgf",
         {{"tau", c.tpgf.tau},
          {"eta", c.tpgf.eta},
          {"epsilon", c.tpgf.epsilon},
          {"timeout_s", c.tpgf.timeout_s},
          {"fusion_rule", to_string(c.tpgf.fusion_rule)}}},
        {"aggregation",
         {{"lambda", c.aggregation.lambda},
          {"epsilon", c.aggregation.epsilon},
          {"renormalize_weights", c.aggregation.renormalize_weights},
          {"resync_on_reconnect", c.aggregation.resync_on_reconnect}}},
        {"connectivity", {{"availability", c.availability}}},
        {"sfl", {{"split_depth", c.sfl_split_depth}}},
        {"sim", {{"compute_seconds_per_flop", c.compute_seconds_per_flop}}},
        {"target_accuracy", c.target_accuracy ? json(*c.target_accuracy) : json(nullptr)},
    };
}

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(origin_ + ": " + key + ": " + what);
    }

    const json& object(const json& j, const std::string& key, const std::set<std::string>& allowed) const {
        if (!j.is_object()) fail(key.empty() ? "<root>" : key, "expected an object");
        for (const auto& [k, v] : j.items()) {
            if (!allowed.contains(k)) fail(join(key, k), "unknown key");
        }
        return j;
    }

    static std::string join(const std::string& parent, const std::string& key) {
        return parent.empty() ? key : parent + "." + key;
    }

    double real(const json& v, const std::string& key) const {
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }

    std::uint64_t count(const json& v, const std::string& key) const {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) fail(key, "must be non-negative");
        fail(key, "expected a non-negative integer");
    }

    bool boolean(const json& v, const std::string& key) const {
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    std::string text(const json& v, const std::string& key) const {
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

private:
    std::string origin_;
};

}  // namespace

ExperimentConfig from_json(const json& j, const ExperimentConfig& base, const std::string& origin) {
    Reader rd(origin);
    ExperimentConfig c = base;
    rd.object(j, "",
              {"mode", "num_clients", "rounds", "steps_per_round", "batch_size", "seed", "layer_dims", "dataset",
               "partition", "allocation", "tpgf", "aggregation", "connectivity", "sfl", "sim", "target_accuracy"});

    auto wrap = [&](auto&& fn, const std::string& key) {
        try {
            fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            rd.fail(key, e.what());
        }
    };

    for (const auto& [k, v] : j.items()) {
        if (k == "mode") wrap([&] { c.mode = parse_mode(rd.text(v, k)); }, k);
        else if (k == "num_clients") c.num_clients = rd.count(v, k);
        else if (k == "rounds") c.rounds = rd.count(v, k);
        else if (k == "steps_per_round") c.steps_per_round = rd.count(v, k);
        else if (k == "batch_size") c.batch_size = rd.count(v, k);
        else if (k == "seed") c.seed = rd.count(v, k);
        else if (k == "target_accuracy") {
            if (v.is_null()) c.target_accuracy.reset();
            else c.target_accuracy = rd.real(v, k);
        } else if (k == "layer_dims") {
            if (!v.is_array()) rd.fail(k, "expected an array of widths");
            c.layer_dims.clear();
            for (const auto& e : v) c.layer_dims.push_back(rd.count(e, k));
        } else if (k == "dataset") {
            rd.object(v, k, {"num_classes", "dim", "count", "spread", "test_fraction"});
            for (const auto& [sk, sv] : v.items()) {
                const auto key = Reader::join(k, sk);
                if (sk == "num_classes") c.dataset.num_classes = rd.count(sv, key);
                else if (sk == "dim") c.dataset.dim = rd.count(sv, key);
                else if (sk == "count") c.dataset.count = rd.count(sv, key);
                else if (sk == "spread") c.dataset.spread = rd.real(sv, key);
                else c.dataset.test_fraction = rd.real(sv, key);
            }
        } else if (k == "partition") {
            rd.object(v, k, {"concentration", "min_samples"});
            for (const auto& [sk, sv] : v.items()) {
                const auto key = Reader::join(k, sk);
                if (sk == "concentration") c.partition.concentration = rd.real(sv, key);
                else c.partition.min_samples = rd.count(sv, key);
            }
        } else if (k == "allocation") {
            rd.object(v, k, {"alpha", "beta", "epsilon", "memory_min_gb", "memory_max_gb", "latency_min_ms",
                             "latency_max_ms", "profiles"});
            for (const auto& [sk, sv] : v.items()) {
                const auto key = Reader::join(k, sk);
                auto& a = c.allocation;
                if (sk == "alpha") a.alpha = rd.real(sv, key);
                else if (sk == "beta") a.beta = rd.real(sv, key);
                else if (sk == "epsilon") a.epsilon = rd.real(sv, key);
                else if (sk == "memory_min_gb") a.ranges.memory_min_gb = rd.real(sv, key);
                else if (sk == "memory_max_gb") a.ranges.memory_max_gb = rd.real(sv, key);
                else if (sk == "latency_min_ms") a.ranges.latency_min_ms = rd.real(sv, key);
                else if (sk == "latency_max_ms") a.ranges.latency_max_ms = rd.real(sv, key);
                else {
                    if (!sv.is_array()) rd.fail(key, "expected an array of {memory_gb, latency_ms}");
                    a.profiles.clear();
                    for (std::size_t i = 0; i < sv.size(); ++i) {
                        const auto pk = key + "[" + std::to_string(i) + "]";
                        rd.object(sv[i], pk, {"memory_gb", "latency_ms"});
                        if (!sv[i].contains("memory_gb") || !sv[i].contains("latency_ms")) {
                            rd.fail(pk, "needs memory_gb and latency_ms");
                        }
                        a.profiles.push_back({rd.real(sv[i]["memory_gb"], pk + ".memory_gb"),
                                              rd.real(sv[i]["latency_ms"], pk + ".latency_ms")});
                    }
                }
            }
        } else if (k == "tpgf") {
            rd.object(v, k, {"tau", "eta", "epsilon", "timeout_s", "fusion_rule"});
            for (const auto& [sk, sv] : v.items()) {
                const auto key = Reader::join(k, sk);
                if (sk == "tau") c.tpgf.tau = rd.real(sv, key);
                else if (sk == "eta") c.tpgf.eta = rd.real(sv, key);
                else if (sk == "epsilon") c.tpgf.epsilon = rd.real(sv, key);
                else if (sk == "timeout_s") c.tpgf.timeout_s = rd.real(sv, key);
                else wrap([&] { c.tpgf.fusion_rule = parse_fusion_rule(rd.text(sv, key)); }, key);
            }
        } else if (k == "aggregation") {
            rd.object(v, k, {"lambda", "epsilon", "renormalize_weights", "resync_on_reconnect"});
            for (const auto& [sk, sv] : v.items()) {
                const auto key = Reader::join(k, sk);
                if (sk == "lambda") c.aggregation.lambda = rd.real(sv, key);
                else if (sk == "epsilon") c.aggregation.epsilon = rd.real(sv, key);
                else if (sk == "renormalize_weights") c.aggregation.renormalize_weights = rd.boolean(sv, key);
                else c.aggregation.resync_on_reconnect = rd.boolean(sv, key);
            }
        } else if (k == "connectivity") {
            rd.object(v, k, {"availability"});
            if (v.contains("availability")) c.availability = rd.real(v["availability"], "connectivity.availability");
        } else if (k == "sfl") {
            rd.object(v, k, {"split_depth"});
            if (v.contains("split_depth")) c.sfl_split_depth = rd.count(v["split_depth"], "sfl.split_depth");
        } else if (k == "sim") {
            rd.object(v, k, {"compute_seconds_per_flop"});
            if (v.contains("compute_seconds_per_flop"))
                c.compute_seconds_per_flop = rd.real(v["compute_seconds_per_flop"], "sim.compute_seconds_per_flop");
        }
    }
    return c;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set " + assignment + ": expected key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    // Build the nested object {"a": {"b": value}} for key "a.b".
    json patch = value;
    std::string rest = key;
    std::vector<std::string> parts;
    std::size_t pos;
    while ((pos = rest.find('.')) != std::string::npos) {
        parts.push_back(rest.substr(0, pos));
        rest = rest.substr(pos + 1);
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    cfg = from_json(patch, cfg, "--set " + key);
}

ExperimentConfig parse_config(const std::optional<std::filesystem::path>& path,
                              const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError(path->string() + ": cannot open");
        std::stringstream buf;
        buf << in.rdbuf();
        const std::string text = buf.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            json j;
            try {
                j = json::parse(text);
            } catch (const json::parse_error& e) {
                throw ConfigError(path->string() + ": " + e.what());
            }
            cfg = from_json(j, cfg, path->string());
        }
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    try {
        validate(cfg);
    } catch (const ConfigError& e) {
        throw ConfigError((path ? path->string() : std::string("config")) + ": " + e.what());
    }
    return cfg;
}

std::vector<std::uint64_t> preset_seeds() { return {1, 2, 3, 4, 5}; }

std::vector<Preset> preset_catalog() {
    std::vector<Preset> out;

    {
        Preset p{"table1-scaled",
                 "SSFL vs baseline SFL at 10 and 50 clients; rounds, MB and simulated time to the "
                 "accuracy SFL reaches at its final round",
                 {}};
        for (std::size_t clients : {10u, 50u}) {
            for (auto seed : preset_seeds()) {
                for (Mode m : {Mode::SSFL, Mode::SFL}) {
                    ExperimentConfig c;
                    c.mode = m;
                    c.num_clients = clients;
                    c.seed = seed;
                    p.runs.emplace_back(to_string(m) + "-c" + std::to_string(clients) + "-s" + std::to_string(seed), c);
                }
            }
        }
        out.push_back(std::move(p));
    }
    {
        Preset p{"ablation-tpgf", "Fusion-rule ablation: full, loss term removed, depth term removed, equal", {}};
        for (FusionRule r : {FusionRule::Full, FusionRule::DepthOnly, FusionRule::LossOnly, FusionRule::Equal}) {
            for (auto seed : preset_seeds()) {
                ExperimentConfig c;
                c.tpgf.fusion_rule = r;
                c.seed = seed;
                p.runs.emplace_back(to_string(r) + "-s" + std::to_string(seed), c);
            }
        }
        out.push_back(std::move(p));
    }
    {
        Preset p{"availability-sweep", "Server gradient availability 100/70/50/20/10/0 percent", {}};
        for (double a : {1.0, 0.7, 0.5, 0.2, 0.1, 0.0}) {
            for (auto seed : preset_seeds()) {
                ExperimentConfig c;
                c.availability = a;
                c.seed = seed;
                std::ostringstream label;
                label << "p" << static_cast<int>(std::lround(a * 100)) << "-s" << seed;
                p.runs.emplace_back(label.str(), c);
            }
        }
        out.push_back(std::move(p));
    }
    {
        Preset p{"allocation-demo", "Depth assignment for the default sampled client profiles", {}};
        p.runs.emplace_back("allocation", ExperimentConfig{});
        out.push_back(std::move(p));
    }
    return out;
}

const Preset& find_preset(const std::string& name) {
    static const std::vector<Preset> catalog = preset_catalog();
    for (const auto& p : catalog) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace ssfl

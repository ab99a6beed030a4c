#include "reach/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "reach/scheduling.hpp"

namespace reach {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view why) {
    throw ConfigError("bad value '" + std::string(value) + "' for " + std::string(key) + ": " + std::string(why));
}

double to_double(std::string_view key, std::string_view v) {
    v = trim(v);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v, "expected a number");
    return out;
}

long long to_int(std::string_view key, std::string_view v) {
    v = trim(v);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "expected an integer");
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    v = trim(v);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, v, "expected an unsigned integer");
    return out;
}

// "name:weight,name:weight"
std::vector<std::pair<std::string, double>> to_weights(std::string_view key, std::string_view v) {
    std::vector<std::pair<std::string, double>> out;
    for (auto item : split(v, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.rfind(':');
        if (colon == std::string_view::npos) bad_value(key, v, "expected name:weight pairs");
        const double w = to_double(key, item.substr(colon + 1));
        if (w < 0.0) bad_value(key, v, "negative weight");
        out.emplace_back(std::string(trim(item.substr(0, colon))), w);
    }
    if (out.empty()) bad_value(key, v, "empty weight list");
    return out;
}

std::array<double, kRegionCount> to_region_weights(std::string_view key, std::string_view v) {
    std::array<double, kRegionCount> w{};
    for (const auto& [name, weight] : to_weights(key, v)) w[index_of(parse_region(name))] += weight;
    return w;
}

TaskTemplate& template_slot(std::vector<TaskTemplate>& templates, const std::string& name) {
    for (auto& t : templates) {
        if (t.name == name) return t;
    }
    TaskTemplate t;
    t.name = name;
    templates.push_back(t);
    return templates.back();
}

GpuModel& model_slot(std::vector<GpuModel>& models, const std::string& name) {
    for (auto& m : models) {
        if (model_name_matches(m.name, name)) return m;
    }
    models.push_back(GpuModel{name, 0.0, 0.0, 0.0, 0.0, 0.0});
    return models.back();
}

DiurnalPhase& phase_slot(std::vector<DiurnalPhase>& phases, const std::string& name) {
    if (phases.empty()) phases = default_phases();
    for (auto& p : phases) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown diurnal phase '" + name + "'");
}

RegionInfo& region_slot(NetworkConfig& net, std::string_view name) {
    if (net.regions.empty()) {
        const auto& d = default_regions();
        net.regions.assign(d.begin(), d.end());
    }
    return net.regions[index_of(parse_region(name))];
}

void set_template_field(TaskTemplate& t, std::string_view field, std::string_view key, std::string_view v) {
    if (field == "base_hours") t.base_hours = to_double(key, v);
    else if (field == "gpus_required") t.gpus_required = static_cast<int>(to_int(key, v));
    else if (field == "mem_per_gpu_gb") t.mem_per_gpu_gb = to_double(key, v);
    else if (field == "comm_profile") t.comm_profile = parse_comm_profile(trim(v));
    else if (field == "comm_intensity") t.comm_intensity = to_double(key, v);
    else if (field == "data_volume_gb") t.data_volume_gb = to_double(key, v);
    else if (field == "critical_probability") t.critical_probability = to_double(key, v);
    else if (field == "slack_lo") t.slack_range.lo = to_double(key, v);
    else if (field == "slack_hi") t.slack_range.hi = to_double(key, v);
    else if (field == "critical_slack_lo") t.critical_slack_range.lo = to_double(key, v);
    else if (field == "critical_slack_hi") t.critical_slack_range.hi = to_double(key, v);
    else if (field == "mix_weight") t.mix_weight = to_double(key, v);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

void ScenarioConfig::set(std::string_view key, std::string_view raw) {
    const std::string_view v = trim(raw);
    const auto parts = split(key, '.');
    const std::string k(key);
    auto unknown = [&]() { return ConfigError("unknown config key '" + k + "'"); };

    if (parts.size() == 3 && parts[0] == "template") {
        set_template_field(template_slot(templates, std::string(parts[1])), parts[2], key, v);
        return;
    }
    if (parts.size() == 3 && parts[0] == "model") {
        GpuModel& m = model_slot(models, std::string(parts[1]));
        if (parts[2] == "memory_gb") m.memory_gb = to_double(key, v);
        else if (parts[2] == "tflops") m.tflops = to_double(key, v);
        else if (parts[2] == "hourly_cost_usd") m.hourly_cost_usd = to_double(key, v);
        else if (parts[2] == "dropout_per_hour") m.base_dropout_per_hour = to_double(key, v);
        else if (parts[2] == "fleet_weight") m.fleet_weight = to_double(key, v);
        else throw unknown();
        return;
    }
    if (parts.size() == 4 && parts[0] == "network" && parts[1] == "region") {
        RegionInfo& r = region_slot(network, parts[2]);
        if (parts[3] == "egress_cost_per_gb") r.egress_cost_per_gb = to_double(key, v);
        else if (parts[3] == "intra_bandwidth_gbps") r.intra_bandwidth_gbps = to_double(key, v);
        else throw unknown();
        return;
    }
    if (parts.size() == 4 && parts[0] == "network" && parts[1] == "phase") {
        DiurnalPhase& p = phase_slot(network.phases, std::string(parts[2]));
        if (parts[3] == "start_hour") p.start_hour = to_double(key, v);
        else if (parts[3] == "end_hour") p.end_hour = to_double(key, v);
        else if (parts[3] == "bandwidth_multiplier") p.bandwidth_multiplier = to_double(key, v);
        else if (parts[3] == "arrival_weight") p.arrival_rate_weight = to_double(key, v);
        else if (parts[3] == "task_mix") p.task_mix = to_weights(key, v);
        else throw unknown();
        return;
    }

    if (k == "preset") throw ConfigError("'preset' can only be chosen on the command line");
    else if (k == "sim.seed") sim.seed = to_u64(key, v);
    else if (k == "sim.drain_hours") sim.drain_hours = to_double(key, v);
    else if (k == "sim.scheduling_tick_s") sim.scheduling_tick_s = to_double(key, v);
    else if (k == "sim.metrics_tick_s") sim.metrics_tick_s = to_double(key, v);
    else if (k == "fleet.n_gpus") fleet.n_gpus = static_cast<int>(to_int(key, v));
    else if (k == "fleet.model_mix") fleet.model_mix = to_weights(key, v);
    else if (k == "fleet.region_mix") fleet.region_mix = to_region_weights(key, v);
    else if (k == "fleet.dropout_per_hour") fleet.dropout_per_hour = to_double(key, v);
    else if (k == "workload.pattern") workload.pattern.kind = parse_pattern(v);
    else if (k == "workload.n_tasks") workload.n_tasks = static_cast<int>(to_int(key, v));
    else if (k == "workload.horizon_hours") workload.horizon_hours = to_double(key, v);
    else if (k == "workload.region_mix") workload.region_weights = to_region_weights(key, v);
    else if (k == "workload.sinusoid_amplitude") workload.pattern.sinusoid_amplitude = to_double(key, v);
    else if (k == "workload.bursts_per_day") workload.pattern.bursts_per_day = static_cast<int>(to_int(key, v));
    else if (k == "workload.burst_share") workload.pattern.burst_share = to_double(key, v);
    else if (k == "workload.burst_width_hours") workload.pattern.burst_width_hours = to_double(key, v);
    else if (k == "workload.background_share") workload.pattern.background_share = to_double(key, v);
    else if (k == "workload.templates_file") apply_file(std::filesystem::path(std::string(v)));
    else if (k == "network.inter_bandwidth_gbps") network.inter_bandwidth_gbps = to_double(key, v);
    else if (k == "network.intra_bandwidth_gbps") {
        const double bw = to_double(key, v);
        for (std::size_t i = 0; i < kRegionCount; ++i) region_slot(network, to_string(static_cast<Region>(i))).intra_bandwidth_gbps = bw;
    }
    else if (k == "network.p_cong") network.p_cong = to_double(key, v);
    else if (k == "network.congestion_multiplier") network.congestion_multiplier = to_double(key, v);
    else if (k == "network.congestion_mean_s") network.congestion_mean_s = to_double(key, v);
    else if (k == "network.congestion_factor_min") network.congestion_factor_min = to_double(key, v);
    else if (k == "network.congestion_factor_max") network.congestion_factor_max = to_double(key, v);
    else if (k == "network.noise") network.noise = to_double(key, v);
    else if (k == "churn.dropout_multiplier") churn.dropout_multiplier = to_double(key, v);
    else if (k == "churn.recovery_mean_hours") churn.recovery_mean_hours = to_double(key, v);
    else if (k == "reward.w_comp") reward.w_comp = to_double(key, v);
    else if (k == "reward.w_deadline") reward.w_deadline = to_double(key, v);
    else if (k == "reward.w_fail") reward.w_fail = to_double(key, v);
    else if (k == "reward.w_cost") reward.w_cost = to_double(key, v);
    else if (k == "reward.w_comm") reward.w_comm = to_double(key, v);
    else if (k == "scheduler.name") scheduler.name = std::string(v);
    else if (k == "scheduler.agent_timeout_s") scheduler.agent_timeout_s = to_double(key, v);
    else throw unknown();
}

void ScenarioConfig::apply_text(std::string_view text, const std::filesystem::path& base_dir) {
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key == "workload.templates_file" && !base_dir.empty()) {
            const std::filesystem::path p(std::string{value});
            apply_file(p.is_absolute() ? p : base_dir / p);
            continue;
        }
        try {
            set(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void ScenarioConfig::apply_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        apply_text(ss.str(), path.parent_path());
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void ScenarioConfig::validate() const {
    if (!(horizon_hours() > 0.0)) throw ConfigError("horizon must be positive");
    if (workload.n_tasks <= 0) throw ConfigError("workload.n_tasks must be positive");
    if (workload.horizon_hours < 24.0) throw ConfigError("workload.horizon_hours must be at least 24");
    if (sim.drain_hours < 0.0) throw ConfigError("sim.drain_hours must be non-negative");
    if (!(sim.scheduling_tick_s > 0.0) || !(sim.metrics_tick_s > 0.0)) throw ConfigError("tick periods must be positive");
    if (fleet.explicit_gpus.empty() && fleet.n_gpus <= 0) throw ConfigError("fleet is empty");
    if (churn.dropout_multiplier < 0.0) throw ConfigError("churn.dropout_multiplier must be non-negative");
    if (!(churn.recovery_mean_hours > 0.0)) throw ConfigError("churn.recovery_mean_hours must be positive");
    if (fleet.dropout_per_hour && *fleet.dropout_per_hour < 0.0) throw ConfigError("negative dropout rate");
    if (std::accumulate(fleet.region_mix.begin(), fleet.region_mix.end(), 0.0) <= 0.0)
        throw ConfigError("fleet.region_mix has no weight");
    if (std::accumulate(workload.region_weights.begin(), workload.region_weights.end(), 0.0) <= 0.0)
        throw ConfigError("workload.region_mix has no weight");
    if (scheduler.name != "agent" && !is_baseline(scheduler.name))
        throw ConfigError("unknown scheduler '" + scheduler.name + "'");
    if (!(scheduler.agent_timeout_s > 0.0)) throw ConfigError("scheduler.agent_timeout_s must be positive");

    if (models.empty()) throw ConfigError("GPU model catalog is empty");
    for (const auto& m : models) {
        if (!(m.tflops > 0.0) || !(m.memory_gb > 0.0) || m.hourly_cost_usd < 0.0 || m.base_dropout_per_hour < 0.0)
            throw ConfigError("GPU model '" + m.name + "' has invalid attributes");
    }
    for (const auto& [name, w] : fleet.model_mix) {
        const bool known = std::any_of(models.begin(), models.end(), [&](const GpuModel& m) { return model_name_matches(m.name, name); });
        if (!known) throw ConfigError("fleet.model_mix names unknown model '" + name + "'");
    }
    validate_templates(templates);
    for (const auto& t : templates) {
        TaskSpec probe;
        probe.template_name = t.name;
        probe.mem_per_gpu_gb = t.mem_per_gpu_gb;
        (void)best_feasible_model(probe, models);
    }
    validate_phases(network.phases.empty() ? default_phases() : network.phases);
    for (const auto& p : network.phases) {
        for (const auto& [name, w] : p.task_mix) (void)find_template(templates, name);
    }
    if (network.congestion_factor_min <= 0.0 || network.congestion_factor_max > 1.0 ||
        network.congestion_factor_min > network.congestion_factor_max)
        throw ConfigError("congestion factor range must lie in (0,1]");
}

std::vector<std::string> preset_names() {
    return {"small", "large", "stress-dropout", "stress-congestion", "workload", "locality"};
}

ScenarioConfig make_preset(std::string_view name) {
    ScenarioConfig c;
    c.preset = std::string(name);
    if (name == "small" || name == "stress-dropout" || name == "stress-congestion" || name == "workload") {
        c.fleet.n_gpus = 64;
        c.workload.n_tasks = 400;
        c.workload.horizon_hours = 48.0;
        c.sim.drain_hours = 24.0;
    } else if (name == "large") {
        c.fleet.n_gpus = 1000;
        c.workload.n_tasks = 5000;
        c.workload.horizon_hours = 168.0;
        c.sim.drain_hours = 24.0;
    } else if (name == "locality") {
        // Two regions, expensive egress, bandwidth-bound single-GPU jobs.
        c.fleet.n_gpus = 32;
        c.fleet.model_mix = {{"H100", 4}, {"RTX4090", 20}, {"RTX3080", 8}};
        c.fleet.region_mix = {1, 0, 0, 0, 1, 0};
        c.workload.region_weights = {1, 0, 0, 0, 1, 0};
        c.workload.n_tasks = 300;
        c.workload.horizon_hours = 48.0;
        c.workload.pattern.kind = PatternKind::Poisson;
        c.sim.drain_hours = 12.0;
        c.network.inter_bandwidth_gbps = 0.5;
        c.network.regions.assign(default_regions().begin(), default_regions().end());
        for (auto& r : c.network.regions) r.egress_cost_per_gb = 0.1;
        c.templates = {
            {"LocalityFinetune", 1.0, 1, 12.0, CommProfile::ComputeHeavy, 1.0, 80.0, 0.3, {2.0, 4.0}, {1.5, 2.5}, 0.6},
            {"LocalityCollective", 2.0, 2, 12.0, CommProfile::AllReduce, 1.0, 40.0, 0.2, {2.0, 4.0}, {1.5, 2.5}, 0.4},
        };
        c.network.phases = default_phases();
        for (auto& p : c.network.phases) p.task_mix.clear();
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
    return c;
}

std::optional<SweepKnob> preset_knob(std::string_view name) {
    if (name == "small") return SweepKnob{"workload.n_tasks", {"100", "200", "400", "700", "1000"}};
    if (name == "stress-dropout") return SweepKnob{"churn.dropout_multiplier", {"1", "2", "4", "8", "16"}};
    if (name == "stress-congestion") return SweepKnob{"network.congestion_multiplier", {"1", "2", "4", "8"}};
    if (name == "workload") return SweepKnob{"workload.pattern", {"phased", "uniform", "sinusoidal", "bursty", "poisson"}};
    return std::nullopt;
}

std::vector<int> apportion(int n, const std::vector<double>& weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (n < 0 || !(total > 0.0)) throw ConfigError("cannot apportion over empty weights");
    std::vector<int> out(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = n * weights[i] / total;
        out[i] = static_cast<int>(std::floor(exact));
        assigned += out[i];
        remainders.emplace_back(exact - out[i], i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int i = 0; assigned < n; ++i, ++assigned) ++out[remainders[static_cast<std::size_t>(i)].second];
    return out;
}

}  // namespace reach

#include "reach/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace reach {

std::vector<TaskTemplate> default_templates() {
    // name, base_h, gpus, mem/gpu, profile, omega, data GB, p(critical), slack, critical slack, mix
    return {
        {"CriticalInference", 0.1, 1, 10.0, CommProfile::PointToPoint, 0.1, 1.0, 0.9, {2.0, 4.0}, {1.5, 2.5}, 0.30},
        {"BertFinetune", 6.0, 1, 12.0, CommProfile::ComputeHeavy, 0.2, 20.0, 0.1, {2.0, 4.0}, {1.5, 2.5}, 0.15},
        {"Llama7bFinetune", 12.0, 16, 24.0, CommProfile::AllReduce, 0.8, 50.0, 0.2, {2.0, 4.0}, {1.5, 2.5}, 0.05},
        {"ResNetTraining", 12.0, 32, 12.0, CommProfile::Ring, 1.0, 150.0, 0.1, {2.0, 4.0}, {1.5, 2.5}, 0.03},
        {"StableDiffusionInference", 0.2, 1, 12.0, CommProfile::PointToPoint, 0.1, 2.0, 0.5, {2.0, 4.0}, {1.5, 2.5}, 0.20},
        {"WhisperTranscription", 1.0, 1, 10.0, CommProfile::PointToPoint, 0.2, 30.0, 0.2, {2.0, 4.0}, {1.5, 2.5}, 0.12},
        {"DistilBertMultiGpu", 4.0, 4, 12.0, CommProfile::AllReduce, 0.6, 10.0, 0.1, {2.0, 4.0}, {1.5, 2.5}, 0.07},
        {"BlenderRender", 2.0, 1, 24.0, CommProfile::ComputeHeavy, 0.1, 5.0, 0.2, {2.0, 4.0}, {1.5, 2.5}, 0.08},
    };
}

void validate_templates(const std::vector<TaskTemplate>& templates) {
    if (templates.empty()) throw ConfigError("template library is empty");
    for (const auto& t : templates) {
        auto bad = [&](const std::string& why) { return ConfigError("template '" + t.name + "': " + why); };
        if (!(t.base_hours > 0.0)) throw bad("base_hours must be positive");
        if (t.gpus_required < 1) throw bad("gpus_required must be >= 1");
        if (t.mem_per_gpu_gb < 0.0 || t.data_volume_gb < 0.0) throw bad("negative memory or data volume");
        if (t.comm_intensity < 0.0 || t.comm_intensity > 1.0) throw bad("comm intensity outside [0,1]");
        if (t.critical_probability < 0.0 || t.critical_probability > 1.0) throw bad("critical_probability outside [0,1]");
        for (const auto& s : {t.slack_range, t.critical_slack_range}) {
            if (!(s.lo > 1.0 && s.hi >= s.lo)) throw bad("slack range must satisfy 1 < lo <= hi");
        }
        if (t.mix_weight < 0.0) throw bad("negative mix weight");
    }
}

const TaskTemplate& find_template(const std::vector<TaskTemplate>& templates, const std::string& name) {
    for (const auto& t : templates) {
        if (t.name == name) return t;
    }
    throw ConfigError("unknown task template '" + name + "'");
}

std::string_view to_string(PatternKind k) {
    switch (k) {
        case PatternKind::Phased: return "phased";
        case PatternKind::Uniform: return "uniform";
        case PatternKind::Sinusoidal: return "sinusoidal";
        case PatternKind::Bursty: return "bursty";
        case PatternKind::Poisson: return "poisson";
    }
    return "?";
}

PatternKind parse_pattern(std::string_view name) {
    for (auto k : {PatternKind::Phased, PatternKind::Uniform, PatternKind::Sinusoidal, PatternKind::Bursty,
                   PatternKind::Poisson}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown workload pattern '" + std::string(name) + "'");
}

SimTime deadline_for_slack(double base_hours, SimTime arrival, double slack) {
    return arrival + slack * base_hours * kSecondsPerHour;
}

SimTime assign_deadline(const TaskTemplate& tmpl, bool critical, SimTime arrival, Rng& rng) {
    const SlackRange& range = critical ? tmpl.critical_slack_range : tmpl.slack_range;
    return deadline_for_slack(tmpl.base_hours, arrival, uniform(rng, range.lo, range.hi));
}

namespace {

std::vector<SimTime> phased_arrivals(int n, double horizon_s, const std::vector<DiurnalPhase>& phases, Rng& rng) {
    // Piecewise-constant density over phase segments; n i.i.d. draws are the
    // conditional arrival set of the inhomogeneous Poisson process.
    std::vector<double> bounds{0.0};
    std::vector<double> weights;
    while (bounds.back() < horizon_s) {
        const SimTime t = bounds.back();
        const auto& p = phase_at(phases, t);
        const double day_start = std::floor(t / (24.0 * kSecondsPerHour)) * 24.0 * kSecondsPerHour;
        const double end = std::min(horizon_s, day_start + p.end_hour * kSecondsPerHour);
        if (!(end > t)) throw ContractViolation("phase segmentation did not advance");
        weights.push_back(p.arrival_rate_weight);
        bounds.push_back(end);
    }
    std::piecewise_constant_distribution<double> dist(bounds.begin(), bounds.end(), weights.begin());
    std::vector<SimTime> out(static_cast<std::size_t>(n));
    for (auto& t : out) t = std::min(dist(rng), std::nextafter(horizon_s, 0.0));
    return out;
}

std::vector<SimTime> homogeneous_poisson(double rate_per_s, double from, double to, Rng& rng) {
    std::vector<SimTime> out;
    if (!(rate_per_s > 0.0)) return out;
    std::exponential_distribution<double> gap(rate_per_s);
    for (double t = from + gap(rng); t < to; t += gap(rng)) out.push_back(t);
    return out;
}

std::vector<SimTime> sinusoidal_arrivals(int n, double horizon_s, double amplitude, Rng& rng) {
    const double period = 24.0 * kSecondsPerHour;
    const double omega = 2.0 * std::numbers::pi / period;
    // Integral of (1 + A sin(wt)) over [0, H).
    const double mass = horizon_s + amplitude * (1.0 - std::cos(omega * horizon_s)) / omega;
    const double base_rate = n / mass;
    const double peak = base_rate * (1.0 + amplitude);
    std::vector<SimTime> out;
    for (SimTime t : homogeneous_poisson(peak, 0.0, horizon_s, rng)) {
        const double accept = (1.0 + amplitude * std::sin(omega * t)) / (1.0 + amplitude);
        if (uniform(rng, 0.0, 1.0) < accept) out.push_back(t);
    }
    return out;
}

std::vector<SimTime> bursty_arrivals(int n, double horizon_s, const WorkloadPattern& p, Rng& rng) {
    const double day = 24.0 * kSecondsPerHour;
    const double slot = day / p.bursts_per_day;
    const double width = p.burst_width_hours * kSecondsPerHour;
    if (width > slot) throw ConfigError("burst window wider than its slot");

    // A burst lives in the j-th slot of each day; only slots that fit the horizon count.
    std::vector<double> slot_starts;
    for (double d = 0.0; d < horizon_s; d += day) {
        for (int j = 0; j < p.bursts_per_day; ++j) {
            const double s = d + j * slot;
            if (s + slot <= horizon_s) slot_starts.push_back(s);
        }
    }
    // Daily volume D: background carries background_share * D per day, each burst burst_share * D.
    const double denom = p.background_share * horizon_s / day + p.burst_share * slot_starts.size();
    const double daily = n / denom;
    std::vector<SimTime> out = homogeneous_poisson(p.background_share * daily / day, 0.0, horizon_s, rng);
    std::poisson_distribution<int> burst_count(p.burst_share * daily);
    for (double s : slot_starts) {
        const double start = s + uniform(rng, 0.0, slot - width);
        const int count = burst_count(rng);
        for (int i = 0; i < count; ++i) out.push_back(start + uniform(rng, 0.0, width));
    }
    return out;
}

std::size_t weighted_pick(Rng& rng, const std::vector<double>& weights) {
    std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
    return d(rng);
}

}  // namespace

std::vector<SimTime> generate_arrivals(const WorkloadConfig& config, const std::vector<DiurnalPhase>& phases,
                                       Rng& rng) {
    const double horizon_s = config.horizon_hours * kSecondsPerHour;
    std::vector<SimTime> arrivals;
    switch (config.pattern.kind) {
        case PatternKind::Phased:
            arrivals = phased_arrivals(config.n_tasks, horizon_s, phases, rng);
            break;
        case PatternKind::Uniform:
            arrivals.resize(static_cast<std::size_t>(config.n_tasks));
            for (auto& t : arrivals) t = uniform(rng, 0.0, horizon_s);
            break;
        case PatternKind::Sinusoidal:
            arrivals = sinusoidal_arrivals(config.n_tasks, horizon_s, config.pattern.sinusoid_amplitude, rng);
            break;
        case PatternKind::Bursty:
            arrivals = bursty_arrivals(config.n_tasks, horizon_s, config.pattern, rng);
            break;
        case PatternKind::Poisson:
            arrivals = homogeneous_poisson(config.n_tasks / horizon_s, 0.0, horizon_s, rng);
            break;
    }
    std::sort(arrivals.begin(), arrivals.end());
    return arrivals;
}

std::vector<TaskSpec> generate(const WorkloadConfig& config, const std::vector<TaskTemplate>& templates,
                               const std::vector<DiurnalPhase>& phases, std::uint64_t seed) {
    if (config.n_tasks <= 0) throw ConfigError("workload.n_tasks must be positive");
    if (config.horizon_hours < 24.0) throw ConfigError("workload.horizon_hours must be at least 24");
    validate_templates(templates);
    validate_phases(phases);

    Rng rng = make_stream(seed, stream::kWorkload);
    const std::vector<SimTime> arrivals = generate_arrivals(config, phases, rng);

    std::vector<double> default_mix;
    for (const auto& t : templates) default_mix.push_back(t.mix_weight);
    std::vector<double> uniform_mix(templates.size(), 1.0);
    const std::vector<double> region_weights(config.region_weights.begin(), config.region_weights.end());
    const std::vector<double> uniform_regions(kRegionCount, 1.0);

    // Resolve phase mixes to template indices once.
    std::vector<std::vector<double>> phase_mix;
    for (const auto& p : phases) {
        if (p.task_mix.empty()) {
            phase_mix.push_back(default_mix);
            continue;
        }
        std::vector<double> w(templates.size(), 0.0);
        for (const auto& [name, weight] : p.task_mix) {
            const auto& tmpl = find_template(templates, name);
            w[static_cast<std::size_t>(&tmpl - templates.data())] += weight;
        }
        phase_mix.push_back(std::move(w));
    }

    const bool uniform_props = config.pattern.kind == PatternKind::Uniform;
    std::vector<TaskSpec> tasks;
    tasks.reserve(arrivals.size());
    for (SimTime arrival : arrivals) {
        std::size_t ti = 0;
        if (config.pattern.kind == PatternKind::Phased) {
            const auto& p = phase_at(phases, arrival);
            ti = weighted_pick(rng, phase_mix[static_cast<std::size_t>(&p - phases.data())]);
        } else {
            ti = weighted_pick(rng, uniform_props ? uniform_mix : default_mix);
        }
        const TaskTemplate& tmpl = templates[ti];
        const bool critical = bernoulli(rng, uniform_props ? 0.5 : tmpl.critical_probability);
        const auto region = static_cast<Region>(weighted_pick(rng, uniform_props ? uniform_regions : region_weights));

        TaskSpec spec;
        spec.id = static_cast<TaskId>(tasks.size());
        spec.template_name = tmpl.name;
        spec.gpus_required = tmpl.gpus_required;
        spec.mem_per_gpu_gb = tmpl.mem_per_gpu_gb;
        spec.base_hours = tmpl.base_hours;
        spec.arrival = arrival;
        spec.deadline = assign_deadline(tmpl, critical, arrival, rng);
        spec.critical = critical;
        spec.comm_profile = tmpl.comm_profile;
        spec.comm_intensity = tmpl.comm_intensity;
        spec.data_region = region;
        spec.data_volume_gb = tmpl.data_volume_gb;
        tasks.push_back(std::move(spec));
    }
    return tasks;
}

}  // namespace reach

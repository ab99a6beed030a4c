#include "reach/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace reach {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kIntraLatencyMs = 2.0;
constexpr double kKmPerMs = 100.0;
constexpr double kMaxPenalty = 5.0;
constexpr std::size_t kNoLink = std::numeric_limits<std::size_t>::max();

}  // namespace

std::vector<DiurnalPhase> default_phases() {
    return {
        {"OvernightBatch", 0.0, 6.0, 1.2, 0.6,
         {{"Llama7bFinetune", 0.30}, {"ResNetTraining", 0.20}, {"BertFinetune", 0.20},
          {"DistilBertMultiGpu", 0.15}, {"WhisperTranscription", 0.10}, {"CriticalInference", 0.05}}},
        {"MorningSession", 6.0, 12.0, 1.0, 1.0,
         {{"CriticalInference", 0.35}, {"StableDiffusionInference", 0.20}, {"WhisperTranscription", 0.15},
          {"BertFinetune", 0.15}, {"BlenderRender", 0.10}, {"DistilBertMultiGpu", 0.05}}},
        {"AfternoonPeak", 12.0, 18.0, 0.6, 1.4,
         {{"CriticalInference", 0.40}, {"StableDiffusionInference", 0.25}, {"WhisperTranscription", 0.10},
          {"BertFinetune", 0.10}, {"BlenderRender", 0.10}, {"DistilBertMultiGpu", 0.05}}},
        {"Evening", 18.0, 24.0, 0.8, 1.0,
         {{"CriticalInference", 0.25}, {"StableDiffusionInference", 0.20}, {"BertFinetune", 0.20},
          {"BlenderRender", 0.15}, {"DistilBertMultiGpu", 0.10}, {"WhisperTranscription", 0.10}}},
    };
}

void validate_phases(const std::vector<DiurnalPhase>& phases) {
    if (phases.empty()) throw ConfigError("phase table is empty");
    std::vector<std::pair<double, double>> windows;
    for (const auto& p : phases) {
        if (!(p.start_hour >= 0.0 && p.end_hour <= 24.0 && p.start_hour < p.end_hour)) {
            throw ConfigError("phase '" + p.name + "' has an invalid window");
        }
        if (p.bandwidth_multiplier < 0.4 || p.bandwidth_multiplier > 1.2) {
            throw ConfigError("phase '" + p.name + "' bandwidth multiplier outside [0.4, 1.2]");
        }
        if (!(p.arrival_rate_weight > 0.0)) {
            throw ConfigError("phase '" + p.name + "' arrival weight must be positive");
        }
        windows.emplace_back(p.start_hour, p.end_hour);
    }
    std::sort(windows.begin(), windows.end());
    double cursor = 0.0;
    for (const auto& [lo, hi] : windows) {
        if (lo != cursor) throw ConfigError("phase windows do not partition [0,24)");
        cursor = hi;
    }
    if (cursor != 24.0) throw ConfigError("phase windows do not partition [0,24)");
}

double hour_of_day(SimTime t) {
    double h = std::fmod(t / kSecondsPerHour, 24.0);
    return h < 0.0 ? h + 24.0 : h;
}

const DiurnalPhase& phase_at(const std::vector<DiurnalPhase>& phases, SimTime t) {
    const double h = hour_of_day(t);
    for (const auto& p : phases) {
        if (h >= p.start_hour && h < p.end_hour) return p;
    }
    return phases.back();
}

double penalty_from_bandwidth(double intensity, double bandwidth_gbps) {
    if (!(bandwidth_gbps > 0.0)) return kMaxPenalty;
    const double raw = 1.0 + intensity * (kReferenceBandwidthGbps / bandwidth_gbps - 1.0);
    return std::clamp(raw, 1.0, kMaxPenalty);
}

double latency_from_distance(double km, double jitter_ms) { return km / kKmPerMs + jitter_ms; }

double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
    constexpr double deg = std::numbers::pi / 180.0;
    const double dlat = (lat2 - lat1) * deg;
    const double dlon = (lon2 - lon1) * deg;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * deg) * std::cos(lat2 * deg) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

Network::Network(NetworkConfig config, Rng rng) : config_(std::move(config)), rng_(std::move(rng)) {
    if (config_.regions.empty()) {
        const auto& defaults = default_regions();
        config_.regions.assign(defaults.begin(), defaults.end());
    }
    if (config_.regions.size() != kRegionCount) throw ConfigError("network needs all six regions");
    for (std::size_t i = 0; i < kRegionCount; ++i) {
        if (index_of(config_.regions[i].id) != i) throw ConfigError("regions out of catalog order");
        if (!(config_.regions[i].intra_bandwidth_gbps > 0.0)) throw ConfigError("intra bandwidth must be positive");
    }
    if (config_.phases.empty()) config_.phases = default_phases();
    validate_phases(config_.phases);
    if (!(config_.inter_bandwidth_gbps > 0.0)) throw ConfigError("inter-region bandwidth must be positive");
    if (config_.p_cong < 0.0 || config_.congestion_multiplier < 0.0) throw ConfigError("negative congestion rate");
    if (config_.noise < 0.0 || config_.noise >= 1.0) throw ConfigError("noise must be in [0,1)");

    for (auto& row : link_of_) row.fill(kNoLink);
    for (std::size_t i = 0; i < kRegionCount; ++i) {
        latency_[i][i] = kIntraLatencyMs;
        for (std::size_t j = i + 1; j < kRegionCount; ++j) {
            const auto& a = config_.regions[i];
            const auto& b = config_.regions[j];
            const double km = great_circle_km(a.latitude_deg, a.longitude_deg, b.latitude_deg, b.longitude_deg);
            const double ms = latency_from_distance(km, uniform(rng_, 0.0, 10.0));
            latency_[i][j] = latency_[j][i] = ms;
            link_of_[i][j] = link_of_[j][i] = links_.size();
            links_.push_back(LinkState{a.id, b.id, ms, config_.inter_bandwidth_gbps, 1.0, std::nullopt});
        }
    }
}

double Network::noise_factor() {
    if (config_.noise == 0.0) return 1.0;
    return uniform(rng_, 1.0 - config_.noise, 1.0 + config_.noise);
}

double Network::sample_latency_ms(Region a, Region b) { return latency_ms(a, b) * noise_factor(); }

std::size_t Network::link_index(Region a, Region b) const { return link_of_[index_of(a)][index_of(b)]; }

double Network::congestion_factor(std::size_t link, SimTime t) const {
    const auto& l = links_[link];
    if (l.congestion_until && *l.congestion_until > t) return l.congestion_factor;
    return 1.0;
}

double Network::expected_bandwidth(Region a, Region b, SimTime t) const {
    if (a == b) return region(a).intra_bandwidth_gbps;
    const std::size_t link = link_index(a, b);
    return links_[link].base_bandwidth_gbps * phase(t).bandwidth_multiplier * congestion_factor(link, t);
}

double Network::effective_bandwidth(Region a, Region b, SimTime t) {
    return expected_bandwidth(a, b, t) * noise_factor();
}

std::vector<CongestionEvent> Network::inject_congestion(SimTime t) {
    std::vector<CongestionEvent> started;
    const double p = config_.p_cong * config_.congestion_multiplier;
    if (p <= 0.0) return started;
    for (std::size_t link = 0; link < links_.size(); ++link) {
        if (!bernoulli(rng_, p)) continue;
        const double factor = uniform(rng_, config_.congestion_factor_min, config_.congestion_factor_max);
        const double duration = exponential_mean(rng_, config_.congestion_mean_s);
        started.push_back(CongestionEvent{link, t, t + duration, factor});
    }
    return started;
}

SimTime Network::begin_congestion(const CongestionEvent& ev) {
    auto& l = links_[ev.link];
    if (l.congestion_until && *l.congestion_until > ev.start) {
        l.congestion_factor = std::min(l.congestion_factor, ev.factor);
        l.congestion_until = std::max(*l.congestion_until, ev.end);
    } else {
        l.congestion_factor = ev.factor;
        l.congestion_until = ev.end;
    }
    return *l.congestion_until;
}

bool Network::end_congestion(std::size_t link, SimTime t) {
    auto& l = links_[link];
    if (!l.congestion_until || *l.congestion_until > t) return false;
    l.congestion_factor = 1.0;
    l.congestion_until.reset();
    return true;
}

double Network::congested_fraction(SimTime t) const {
    if (links_.empty()) return 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < links_.size(); ++i) {
        if (congestion_factor(i, t) < 1.0) ++n;
    }
    return static_cast<double>(n) / static_cast<double>(links_.size());
}

CommPenalty Network::comm_penalty(const TaskSpec& task, std::span<const Region> gpu_regions, SimTime t) {
    if (gpu_regions.empty()) throw ContractViolation("comm_penalty on an empty GPU set");

    // Critical links are region pairs; each distinct link is queried once.
    std::array<std::array<bool, kRegionCount>, kRegionCount> critical{};
    auto mark = [&](Region a, Region b) {
        const std::size_t i = index_of(a), j = index_of(b);
        critical[std::min(i, j)][std::max(i, j)] = true;
    };

    switch (task.comm_profile) {
        case CommProfile::PointToPoint:
        case CommProfile::ComputeHeavy:
            if (gpu_regions.size() == 1 && gpu_regions[0] == task.data_region) {
                return CommPenalty{1.0, region(task.data_region).intra_bandwidth_gbps};
            }
            for (Region r : gpu_regions) mark(task.data_region, r);
            break;
        case CommProfile::Ring:
            for (std::size_t i = 0; i + 1 < gpu_regions.size(); ++i) mark(gpu_regions[i], gpu_regions[i + 1]);
            if (gpu_regions.size() > 2) mark(gpu_regions.back(), gpu_regions.front());
            break;
        case CommProfile::AllReduce:
            for (std::size_t i = 0; i < gpu_regions.size(); ++i)
                for (std::size_t j = i + 1; j < gpu_regions.size(); ++j) mark(gpu_regions[i], gpu_regions[j]);
            break;
    }

    double bottleneck = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kRegionCount; ++i) {
        for (std::size_t j = i; j < kRegionCount; ++j) {
            if (!critical[i][j]) continue;
            bottleneck = std::min(bottleneck, effective_bandwidth(static_cast<Region>(i), static_cast<Region>(j), t));
        }
    }
    if (std::isinf(bottleneck)) return CommPenalty{1.0, bottleneck};
    return CommPenalty{penalty_from_bandwidth(task.comm_intensity, bottleneck), bottleneck};
}

}  // namespace reach

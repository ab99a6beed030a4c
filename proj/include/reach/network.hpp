#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reach/rng.hpp"
#include "reach/types.hpp"

namespace reach {

struct DiurnalPhase {
    std::string name;
    double start_hour = 0.0;  // [start_hour, end_hour) on a 24 h clock
    double end_hour = 0.0;
    double bandwidth_multiplier = 1.0;
    double arrival_rate_weight = 1.0;
    std::vector<std::pair<std::string, double>> task_mix;  // template name -> weight
};

// MorningSession [6,12), AfternoonPeak [12,18), Evening [18,24), OvernightBatch [0,6).
std::vector<DiurnalPhase> default_phases();
void validate_phases(const std::vector<DiurnalPhase>& phases);
double hour_of_day(SimTime t);
const DiurnalPhase& phase_at(const std::vector<DiurnalPhase>& phases, SimTime t);

struct NetworkConfig {
    std::vector<RegionInfo> regions;  // empty means default_regions()
    double inter_bandwidth_gbps = 1.0;
    double p_cong = 0.02;
    double congestion_multiplier = 1.0;
    double congestion_factor_min = 0.1;
    double congestion_factor_max = 0.5;
    double congestion_mean_s = 1800.0;
    double noise = 0.05;  // per-query multiplicative noise half-width
    std::vector<DiurnalPhase> phases;  // empty means default_phases()
};

struct LinkState {
    Region a;
    Region b;
    double base_latency_ms = 0.0;
    double base_bandwidth_gbps = 0.0;
    double congestion_factor = 1.0;
    std::optional<SimTime> congestion_until;
};

struct CongestionEvent {
    std::size_t link = 0;
    SimTime start = 0.0;
    SimTime end = 0.0;
    double factor = 1.0;
};

struct CommPenalty {
    double p_comm = 1.0;
    // Bottleneck bandwidth over the pattern's critical links; +inf when the
    // pattern has no links (single-GPU collective).
    double bandwidth_gbps = 0.0;
};

// Clamped penalty: 1 + intensity * (B_ref / B_eff - 1), limited to [1, 5].
double penalty_from_bandwidth(double intensity, double bandwidth_gbps);

// One-way latency: distance at 100 km per ms plus a fixed jitter term.
double latency_from_distance(double km, double jitter_ms);

// Great-circle distance in km (haversine, mean Earth radius).
double great_circle_km(double lat1, double lon1, double lat2, double lon2);

class Network {
public:
    // rng is the network stream; latency jitter is drawn from it on construction.
    Network(NetworkConfig config, Rng rng);

    const NetworkConfig& config() const { return config_; }
    const std::vector<LinkState>& links() const { return links_; }
    const RegionInfo& region(Region r) const { return config_.regions[index_of(r)]; }

    double latency_ms(Region a, Region b) const { return latency_[index_of(a)][index_of(b)]; }
    // Latency with per-sample fluctuation, drawn from the network stream.
    double sample_latency_ms(Region a, Region b);

    const DiurnalPhase& phase(SimTime t) const { return phase_at(config_.phases, t); }

    // Bandwidth without the per-query noise; pure function of state and t.
    double expected_bandwidth(Region a, Region b, SimTime t) const;
    double effective_bandwidth(Region a, Region b, SimTime t);

    // One Bernoulli trial per inter-region link; returns the started events.
    std::vector<CongestionEvent> inject_congestion(SimTime t);
    // Applies a started event; overlapping events keep the minimum factor and
    // the latest end. Returns the link's resulting end time.
    SimTime begin_congestion(const CongestionEvent& ev);
    // Clears the link if its congestion window has elapsed by t.
    bool end_congestion(std::size_t link, SimTime t);

    double congestion_factor(std::size_t link, SimTime t) const;
    double congested_fraction(SimTime t) const;
    std::size_t link_index(Region a, Region b) const;

    // gpu_regions must be ordered by ascending GPU id (ring order).
    CommPenalty comm_penalty(const TaskSpec& task, std::span<const Region> gpu_regions, SimTime t);

private:
    double noise_factor();

    NetworkConfig config_;
    Rng rng_;
    std::array<std::array<double, kRegionCount>, kRegionCount> latency_{};
    std::array<std::array<std::size_t, kRegionCount>, kRegionCount> link_of_{};
    std::vector<LinkState> links_;
};

}  // namespace reach

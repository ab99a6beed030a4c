#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "reach/network.hpp"
#include "reach/rng.hpp"
#include "reach/types.hpp"

namespace reach {

struct SlackRange {
    double lo = 2.0;
    double hi = 4.0;
};

struct TaskTemplate {
    std::string name;
    double base_hours = 1.0;
    int gpus_required = 1;
    double mem_per_gpu_gb = 0.0;
    CommProfile comm_profile = CommProfile::PointToPoint;
    double comm_intensity = 0.0;
    double data_volume_gb = 0.0;
    double critical_probability = 0.0;
    SlackRange slack_range{2.0, 4.0};
    SlackRange critical_slack_range{1.5, 2.5};
    // Template weight for patterns that do not follow the phase table.
    double mix_weight = 1.0;
};

// The four reference workloads plus a few common community jobs.
std::vector<TaskTemplate> default_templates();
void validate_templates(const std::vector<TaskTemplate>& templates);
const TaskTemplate& find_template(const std::vector<TaskTemplate>& templates, const std::string& name);

enum class PatternKind : std::uint8_t { Phased, Uniform, Sinusoidal, Bursty, Poisson };
std::string_view to_string(PatternKind k);
PatternKind parse_pattern(std::string_view name);

struct WorkloadPattern {
    PatternKind kind = PatternKind::Phased;
    double sinusoid_amplitude = 0.8;
    int bursts_per_day = 3;
    double burst_share = 0.2;  // fraction of daily volume per burst window
    double burst_width_hours = 1.0;
    double background_share = 0.4;  // remaining daily volume, spread evenly
};

struct WorkloadConfig {
    WorkloadPattern pattern;
    int n_tasks = 100;
    double horizon_hours = 72.0;
    std::array<double, kRegionCount> region_weights{1, 1, 1, 1, 1, 1};
};

// Deadline = arrival + slack * base_hours (reference-GPU duration).
SimTime deadline_for_slack(double base_hours, SimTime arrival, double slack);
SimTime assign_deadline(const TaskTemplate& tmpl, bool critical, SimTime arrival, Rng& rng);

// Arrival times in seconds, ascending. Phased and Uniform produce exactly
// n_tasks; Sinusoidal, Bursty and Poisson are Poisson-process realisations
// with expected count n_tasks.
std::vector<SimTime> generate_arrivals(const WorkloadConfig& config, const std::vector<DiurnalPhase>& phases,
                                       Rng& rng);

std::vector<TaskSpec> generate(const WorkloadConfig& config, const std::vector<TaskTemplate>& templates,
                               const std::vector<DiurnalPhase>& phases, std::uint64_t seed);

}  // namespace reach

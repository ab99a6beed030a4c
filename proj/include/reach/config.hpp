#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reach/accounting.hpp"
#include "reach/network.hpp"
#include "reach/types.hpp"
#include "reach/workload.hpp"

namespace reach {

struct FleetConfig {
    int n_gpus = 64;
    std::vector<std::pair<std::string, double>> model_mix;  // empty: catalog fleet weights
    std::array<double, kRegionCount> region_mix{1, 1, 1, 1, 1, 1};
    std::optional<double> dropout_per_hour;                 // overrides every model's base rate
    std::vector<GpuNode> explicit_gpus;                     // replaces generated fleet when non-empty
};

struct ChurnConfig {
    double dropout_multiplier = 1.0;
    double recovery_mean_hours = 0.5;
};

struct SchedulerConfig {
    std::string name = "greedy";
    double agent_timeout_s = 5.0;
};

struct SimConfig {
    std::uint64_t seed = 1;
    double drain_hours = 24.0;
    double scheduling_tick_s = 60.0;
    double metrics_tick_s = 3600.0;
};

// A parameter grid attached to a preset (e.g. dropout multipliers).
struct SweepKnob {
    std::string key;
    std::vector<std::string> values;
};

struct ScenarioConfig {
    std::string preset = "custom";
    FleetConfig fleet;
    WorkloadConfig workload;
    NetworkConfig network;
    ChurnConfig churn;
    RewardWeights reward;
    SchedulerConfig scheduler;
    SimConfig sim;
    std::vector<GpuModel> models = default_gpu_models();
    std::vector<TaskTemplate> templates = default_templates();

    double horizon_hours() const { return workload.horizon_hours + sim.drain_hours; }

    // Sets one dotted key; throws ConfigError on unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
    // Parses "key = value" lines ('#' starts a comment). base_dir resolves
    // relative paths such as workload.templates_file.
    void apply_text(std::string_view text, const std::filesystem::path& base_dir = {});
    void apply_file(const std::filesystem::path& path);

    // Throws ConfigError describing the first problem found.
    void validate() const;
};

std::vector<std::string> preset_names();
ScenarioConfig make_preset(std::string_view name);
// Knob swept by the preset's grid; nullopt for presets without one.
std::optional<SweepKnob> preset_knob(std::string_view name);

// Largest-remainder apportionment of n over weights (ties: earlier index).
std::vector<int> apportion(int n, const std::vector<double>& weights);

}  // namespace reach

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reach/config.hpp"
#include "reach/engine.hpp"

namespace reach {

inline constexpr std::string_view kTraceHeader =
    "time_s,event,task_id,gpu_ids,status,reward,cost_usd,p_comm,bandwidth_penalty";

// Shortest decimal that parses back to the same double.
std::string format_number(double x);
std::string format_trace_row(const TraceRow& row);

struct RunResult {
    MetricsReport metrics;
    std::string metrics_json;  // serialized, trailing newline
    std::string trace_csv;     // empty unless requested
    std::size_t events = 0;
    double wall_seconds = 0.0;
};

// config.scheduler.name must be a baseline.
RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed, bool with_trace);

// Writes via a sibling temp file and rename, so readers never see partial output.
void write_atomic(const std::filesystem::path& path, std::string_view content);
// metrics.json and trace.csv in dir; nothing is renamed into place until both
// temp files are complete.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

// Flattens nested objects/arrays into dotted keys. Arrays of scalars are
// indexed (counts.0, counts.1, ...); latency_samples_ms is left out.
std::vector<std::pair<std::string, std::string>> flatten_metrics(const nlohmann::ordered_json& metrics);

struct SweepSpec {
    ScenarioConfig base;
    std::vector<std::string> schedulers{"greedy", "random", "roundrobin"};
    std::optional<SweepKnob> knob;
    std::vector<std::uint64_t> seeds{1};
    int jobs = 1;
};

struct SweepRow {
    std::string scheduler;
    std::string knob;
    std::string value;
    std::uint64_t seed = 0;
    nlohmann::ordered_json metrics;
};

// Cartesian product in (scheduler, knob value, seed) order. Any failing run
// aborts the sweep with a ConfigError naming the failing combination.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(std::string_view text);
std::string to_csv(const CsvTable& table);

// Groups sweep rows by (scheduler, knob, value) and emits mean and sample
// standard deviation of every numeric column across seeds.
CsvTable summarize_sweeps(const std::vector<CsvTable>& sweeps);
// Empirical CDF rows (value, cumulative_fraction) of the given samples.
CsvTable empirical_cdf(std::vector<double> samples, std::string_view column);

std::string read_file(const std::filesystem::path& path);

}  // namespace reach

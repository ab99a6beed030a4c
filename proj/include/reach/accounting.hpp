#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "reach/types.hpp"

namespace reach {

struct RewardWeights {
    double w_comp = 1.0;
    double w_deadline = 1.0;
    double w_fail = -1.0;
    double w_cost = -0.2;
    double w_comm = -0.5;
};

// Weighted contribution of each reward term; total() is the scalar reward.
struct RewardComponents {
    double comp = 0.0;
    double deadline = 0.0;
    double fail = 0.0;
    double cost = 0.0;
    double comm = 0.0;

    double total() const { return comp + deadline + fail + cost + comm; }
    bool operator==(const RewardComponents&) const = default;
};

struct TaskOutcome {
    TaskId task_id = 0;
    TaskStatus status = TaskStatus::Expired;
    bool critical = false;
    SimTime arrival = 0.0;
    SimTime finished_at = 0.0;
    std::vector<GpuId> gpus;
    double total_cost_usd = 0.0;
    double c_norm = 0.0;
    double p_comm = 1.0;
    double turnaround_s = 0.0;
    double ideal_s = 0.0;
    // 1 - B_eff / B_ref clamped to [0,1]; unset for never-dispatched tasks.
    std::optional<double> bandwidth_penalty;
    // Unset for Expired tasks, which produce no reward.
    std::optional<RewardComponents> components;

    double reward() const { return components ? components->total() : 0.0; }
};

// Throws ContractViolation for Expired or non-terminal statuses.
RewardComponents reward_components(TaskStatus status, double c_norm, double p_comm, const RewardWeights& w);
double reward(const TaskOutcome& outcome, const RewardWeights& w);

struct CostBreakdown {
    double compute_usd = 0.0;
    double egress_usd = 0.0;
    double budget_ref_usd = 0.0;
    double usd = 0.0;
    double c_norm = 0.0;
};

// Cheapest memory-feasible model by hourly price (ties: faster first).
const GpuModel& cheapest_feasible_model(const TaskSpec& task, std::span<const GpuModel> models);
// Fastest memory-feasible model.
const GpuModel& best_feasible_model(const TaskSpec& task, std::span<const GpuModel> models);

// Cost of the task on gpus_required GPUs of the cheapest feasible model at
// reference-scaled duration; the normaliser for C_norm.
double budget_reference_usd(const TaskSpec& task, std::span<const GpuModel> models);
// Zero-wait, staging-free duration on the best feasible model.
double ideal_seconds(const TaskSpec& task, std::span<const GpuModel> models);

CostBreakdown task_cost(const TaskSpec& task, std::span<const GpuNode* const> gpus, double billed_hours,
                        double egress_rate_per_gb, std::span<const GpuModel> models);

struct ClassMetrics {
    std::size_t arrived = 0;
    std::size_t completed = 0;
    std::size_t on_time = 0;
    std::optional<double> completion_rate;
    std::optional<double> deadline_satisfaction;
    std::optional<double> mean_slowdown;
};

struct OutcomeCounts {
    std::size_t arrived = 0;
    std::size_t completed_on_time = 0;
    std::size_t completed_late = 0;
    std::size_t failed = 0;
    std::size_t expired = 0;

    std::size_t completed() const { return completed_on_time + completed_late; }
};

inline constexpr std::size_t kPenaltyBins = 10;

struct MetricsReport {
    OutcomeCounts counts;
    double horizon_hours = 0.0;
    std::optional<double> completion_rate;
    std::optional<double> deadline_satisfaction;
    double goodput_per_hour = 0.0;
    std::optional<double> mean_slowdown;
    std::optional<double> p95_slowdown;
    ClassMetrics critical;
    ClassMetrics normal;
    std::array<std::size_t, kPenaltyBins> bandwidth_penalty_hist{};
    double cost_total_usd = 0.0;
    std::optional<double> mean_p_comm;
    double reward_total = 0.0;
    std::vector<double> slowdowns;            // completed tasks, in outcome order
    std::vector<double> latency_samples_ms;   // one per dispatched task
};

double slowdown(const TaskOutcome& outcome);

MetricsReport compute_metrics(std::span<const TaskOutcome> outcomes, double horizon_hours,
                              std::vector<double> latency_samples_ms);

// Stable metrics.json layout.
nlohmann::ordered_json to_json(const MetricsReport& report);

}  // namespace reach

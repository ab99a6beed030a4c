#include "reach/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace reach {

RewardComponents reward_components(TaskStatus status, double c_norm, double p_comm, const RewardWeights& w) {
    if (status == TaskStatus::Expired) throw ContractViolation("reward requested for an expired task");
    if (!is_terminal(status)) throw ContractViolation("reward requested for a non-terminal task");

    const double on_time = status == TaskStatus::CompletedOnTime ? 1.0 : 0.0;
    const double late = status == TaskStatus::CompletedLate ? 1.0 : 0.0;
    const double failed = status == TaskStatus::Failed ? 1.0 : 0.0;

    RewardComponents c;
    c.comp = w.w_comp * (on_time + late);
    c.deadline = w.w_deadline * on_time;
    c.fail = w.w_fail * failed;
    c.cost = w.w_cost * c_norm;
    c.comm = w.w_comm * (p_comm - 1.0);
    return c;
}

double reward(const TaskOutcome& outcome, const RewardWeights& w) {
    return reward_components(outcome.status, outcome.c_norm, outcome.p_comm, w).total();
}

namespace {

bool fits(const TaskSpec& task, const GpuModel& m) { return m.memory_gb >= task.mem_per_gpu_gb; }

}  // namespace

const GpuModel& cheapest_feasible_model(const TaskSpec& task, std::span<const GpuModel> models) {
    const GpuModel* best = nullptr;
    for (const auto& m : models) {
        if (!fits(task, m)) continue;
        if (!best || m.hourly_cost_usd < best->hourly_cost_usd ||
            (m.hourly_cost_usd == best->hourly_cost_usd && m.tflops > best->tflops)) {
            best = &m;
        }
    }
    if (!best) throw ConfigError("task '" + task.template_name + "' fits no GPU model");
    return *best;
}

const GpuModel& best_feasible_model(const TaskSpec& task, std::span<const GpuModel> models) {
    const GpuModel* best = nullptr;
    for (const auto& m : models) {
        if (fits(task, m) && (!best || m.tflops > best->tflops)) best = &m;
    }
    if (!best) throw ConfigError("task '" + task.template_name + "' fits no GPU model");
    return *best;
}

double budget_reference_usd(const TaskSpec& task, std::span<const GpuModel> models) {
    const GpuModel& m = cheapest_feasible_model(task, models);
    const double hours = task.base_hours * kReferenceTflops / m.tflops;
    return task.gpus_required * m.hourly_cost_usd * hours;
}

double ideal_seconds(const TaskSpec& task, std::span<const GpuModel> models) {
    const GpuModel& m = best_feasible_model(task, models);
    return task.base_hours * kSecondsPerHour * kReferenceTflops / m.tflops;
}

CostBreakdown task_cost(const TaskSpec& task, std::span<const GpuNode* const> gpus, double billed_hours,
                        double egress_rate_per_gb, std::span<const GpuModel> models) {
    if (billed_hours < 0.0) throw ContractViolation("negative billed hours");
    CostBreakdown c;
    bool remote = false;
    for (const GpuNode* g : gpus) {
        c.compute_usd += g->hourly_cost_usd * billed_hours;
        remote = remote || g->region != task.data_region;
    }
    c.egress_usd = remote ? task.data_volume_gb * egress_rate_per_gb : 0.0;
    c.usd = c.compute_usd + c.egress_usd;
    c.budget_ref_usd = budget_reference_usd(task, models);
    c.c_norm = c.budget_ref_usd > 0.0 ? std::clamp(c.usd / c.budget_ref_usd, 0.0, 2.0) : 0.0;
    return c;
}

double slowdown(const TaskOutcome& outcome) {
    if (!(outcome.ideal_s > 0.0)) return 1.0;
    return std::max(1.0, outcome.turnaround_s / outcome.ideal_s);
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> mean(const std::vector<double>& xs) {
    if (xs.empty()) return std::nullopt;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Nearest-rank percentile.
std::optional<double> percentile(std::vector<double> xs, double q) {
    if (xs.empty()) return std::nullopt;
    std::sort(xs.begin(), xs.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    return xs[std::clamp<std::size_t>(rank, 1, xs.size()) - 1];
}

void finish_class(ClassMetrics& m, const std::vector<double>& slowdowns) {
    m.completion_rate = ratio(m.completed, m.arrived);
    m.deadline_satisfaction = ratio(m.on_time, m.completed);
    m.mean_slowdown = mean(slowdowns);
}

nlohmann::ordered_json opt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json class_json(const ClassMetrics& m) {
    nlohmann::ordered_json j;
    j["arrived"] = m.arrived;
    j["completed"] = m.completed;
    j["completed_on_time"] = m.on_time;
    j["completion_rate"] = opt(m.completion_rate);
    j["deadline_satisfaction"] = opt(m.deadline_satisfaction);
    j["mean_slowdown"] = opt(m.mean_slowdown);
    return j;
}

}  // namespace

MetricsReport compute_metrics(std::span<const TaskOutcome> outcomes, double horizon_hours,
                              std::vector<double> latency_samples_ms) {
    MetricsReport r;
    r.horizon_hours = horizon_hours;
    r.latency_samples_ms = std::move(latency_samples_ms);

    std::vector<double> crit_slow, norm_slow, p_comms;
    for (const auto& o : outcomes) {
        ClassMetrics& cls = o.critical ? r.critical : r.normal;
        ++r.counts.arrived;
        ++cls.arrived;
        switch (o.status) {
            case TaskStatus::CompletedOnTime: ++r.counts.completed_on_time; break;
            case TaskStatus::CompletedLate: ++r.counts.completed_late; break;
            case TaskStatus::Failed: ++r.counts.failed; break;
            case TaskStatus::Expired: ++r.counts.expired; break;
            default: throw ContractViolation("metrics over a non-terminal outcome");
        }
        if (is_completed(o.status)) {
            ++cls.completed;
            if (o.status == TaskStatus::CompletedOnTime) ++cls.on_time;
            const double s = slowdown(o);
            r.slowdowns.push_back(s);
            (o.critical ? crit_slow : norm_slow).push_back(s);
        }
        if (o.bandwidth_penalty) {
            const auto bin = static_cast<std::size_t>(std::floor(*o.bandwidth_penalty * kPenaltyBins));
            ++r.bandwidth_penalty_hist[std::min(bin, kPenaltyBins - 1)];
            p_comms.push_back(o.p_comm);
        }
        r.cost_total_usd += o.total_cost_usd;
        r.reward_total += o.reward();
    }

    const std::size_t completed = r.counts.completed();
    r.completion_rate = ratio(completed, r.counts.arrived);
    r.deadline_satisfaction = ratio(r.counts.completed_on_time, completed);
    r.goodput_per_hour = horizon_hours > 0.0 ? static_cast<double>(completed) / horizon_hours : 0.0;
    r.mean_slowdown = mean(r.slowdowns);
    r.p95_slowdown = percentile(r.slowdowns, 0.95);
    r.mean_p_comm = mean(p_comms);
    finish_class(r.critical, crit_slow);
    finish_class(r.normal, norm_slow);
    return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["completion_rate"] = opt(r.completion_rate);
    j["deadline_satisfaction"] = opt(r.deadline_satisfaction);
    j["goodput_per_hour"] = r.goodput_per_hour;
    j["mean_slowdown"] = opt(r.mean_slowdown);
    j["p95_slowdown"] = opt(r.p95_slowdown);
    j["per_class"] = {{"critical", class_json(r.critical)}, {"normal", class_json(r.normal)}};

    nlohmann::ordered_json hist;
    hist["bin_width"] = 1.0 / kPenaltyBins;
    hist["counts"] = r.bandwidth_penalty_hist;
    j["bandwidth_penalty_hist"] = hist;

    j["cost_total_usd"] = r.cost_total_usd;
    j["counts"] = {{"arrived", r.counts.arrived},
                   {"completed_on_time", r.counts.completed_on_time},
                   {"completed_late", r.counts.completed_late},
                   {"failed", r.counts.failed},
                   {"expired", r.counts.expired}};
    j["horizon_hours"] = r.horizon_hours;
    j["mean_p_comm"] = opt(r.mean_p_comm);
    j["reward_total"] = r.reward_total;
    j["latency_samples_ms"] = r.latency_samples_ms;
    return j;
}

}  // namespace reach

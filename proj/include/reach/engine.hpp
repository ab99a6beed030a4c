#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "reach/accounting.hpp"
#include "reach/config.hpp"
#include "reach/network.hpp"
#include "reach/rng.hpp"
#include "reach/scheduling.hpp"
#include "reach/types.hpp"

namespace reach {

enum class EventKind : std::uint8_t {
    TaskArrival,
    StageComplete,
    TaskComplete,
    GpuFailure,
    GpuRecovery,
    CongestionStart,
    CongestionEnd,
    PhaseChange,
    SchedulingTick,
    MetricsTick,
    HorizonEnd,
};
std::string_view to_string(EventKind k);

struct SimEvent {
    SimTime time = 0.0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::HorizonEnd;
    std::uint32_t subject = 0;  // task id, gpu id or link index
    double factor = 1.0;        // CongestionStart only
    SimTime until = 0.0;        // CongestionStart only
    std::uint32_t epoch = 0;    // GpuFailure only; stale clocks are dropped

    // Min-heap order on (time, seq).
    bool operator>(const SimEvent& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

// One trace.csv row. Empty optionals become empty cells.
struct TraceRow {
    SimTime time = 0.0;
    std::string event;
    std::optional<TaskId> task_id;
    std::vector<GpuId> gpu_ids;
    std::string status;
    std::optional<double> reward;
    std::optional<double> cost_usd;
    std::optional<double> p_comm;
    std::optional<double> bandwidth_penalty;
};

struct DispatchReceipt {
    TaskId task_id = 0;
    double staging_s = 0.0;
    double compute_s = 0.0;
    SimTime predicted_finish = 0.0;
    double p_comm = 1.0;
    double bandwidth_gbps = 0.0;
    double cost_estimate_usd = 0.0;
};

class DispatchRejected : public std::runtime_error {
public:
    DispatchRejected(TaskId task, std::optional<GpuId> gpu, std::string reason);
    TaskId task_id() const { return task_; }
    std::optional<GpuId> gpu_id() const { return gpu_; }
    const std::string& reason() const { return reason_; }

private:
    TaskId task_;
    std::optional<GpuId> gpu_;
    std::string reason_;
};

struct ChurnStats {
    std::size_t failures = 0;
    double online_gpu_hours = 0.0;  // exposure: time GPUs spent online
};

// Fleet sized by config: model quotas by largest remainder, then shuffled and
// placed in regions from the fleet stream.
std::vector<GpuNode> build_fleet(const FleetConfig& fleet, std::span<const GpuModel> models, std::uint64_t seed);

// base_hours * (REF / slowest GPU) * p_comm.
double execution_hours(const TaskSpec& task, std::span<const GpuNode* const> gpus, double p_comm);

class Engine {
public:
    using TraceHook = std::function<void(const TraceRow&)>;
    using OutcomeHook = std::function<void(const TaskOutcome&)>;

    // Builds the fleet and workload from the scenario. A baseline strategy is
    // attached when scheduler.name names one; "agent" leaves the slot empty.
    Engine(ScenarioConfig config, std::uint64_t seed);
    // Explicit task list instead of the generated workload.
    Engine(ScenarioConfig config, std::uint64_t seed, std::vector<TaskSpec> tasks);

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    void set_strategy(std::unique_ptr<Strategy> strategy) { strategy_ = std::move(strategy); }
    Strategy* strategy() const { return strategy_.get(); }
    void set_trace_hook(TraceHook hook) { trace_hook_ = std::move(hook); }
    void set_outcome_hook(OutcomeHook hook) { outcome_hook_ = std::move(hook); }

    // Processes every event with time <= t_end; the clock ends at t_end.
    std::vector<TaskOutcome> run_until(SimTime t_end);
    // Runs to HorizonEnd.
    std::vector<TaskOutcome> run();

    DispatchReceipt dispatch(TaskId task, std::span<const GpuId> gpus);

    // Expires overdue pending tasks and offers the rest to the strategy.
    void pending_queue_tick();

    // Takes an online GPU down now, as if its churn clock had fired. Used for
    // scripted outages; recovery is drawn from the churn stream as usual.
    void force_failure(GpuId gpu);

    SimTime now() const { return now_; }
    SimTime horizon() const { return horizon_; }
    bool finished() const { return finished_; }
    std::uint64_t seed() const { return seed_; }
    const ScenarioConfig& config() const { return config_; }
    std::span<const GpuNode> gpus() const { return gpus_; }
    std::span<const TaskRecord> tasks() const { return tasks_; }
    const TaskRecord& task(TaskId id) const { return tasks_.at(id); }
    const Network& network() const { return network_; }
    const PendingQueue& pending() const { return pending_; }
    std::span<const TaskOutcome> outcomes() const { return outcomes_; }
    double max_dropout_rate() const { return max_dropout_; }
    double dropout_rate(const GpuNode& g) const { return g.base_dropout_per_hour * config_.churn.dropout_multiplier; }
    ChurnStats churn_stats() const;
    std::size_t events_processed() const { return events_processed_; }

    CandidateSet candidates(TaskId task) const;
    MetricsReport metrics() const;

    // Occupancy conservation and offline-implies-idle; throws ContractViolation.
    void check_invariants() const;

private:
    void init(std::vector<TaskSpec> tasks);
    void push(SimEvent ev);
    void handle(const SimEvent& ev);
    void schedule_failure(GpuNode& g);

    void on_arrival(TaskId id);
    void on_stage_complete(TaskId id);
    void on_task_complete(TaskId id);
    void on_gpu_failure(GpuId id);
    void on_gpu_recovery(GpuId id);
    void on_metrics_tick();
    void on_horizon_end();

    void release(TaskRecord& t, std::optional<GpuId> offline_gpu = std::nullopt);
    void finalize(TaskRecord& t, TaskStatus status);
    TaskOutcome make_outcome(const TaskRecord& t) const;
    std::vector<const GpuNode*> assigned_nodes(const TaskRecord& t) const;
    void trace(TraceRow row) const;

    ScenarioConfig config_;
    std::uint64_t seed_;
    SimTime now_ = 0.0;
    SimTime horizon_ = 0.0;
    bool finished_ = false;

    std::vector<GpuNode> gpus_;
    std::vector<std::uint32_t> failure_epoch_;
    std::vector<TaskRecord> tasks_;
    Network network_;
    Rng churn_rng_;
    double best_tflops_ = kBestTflops;
    double max_dropout_ = 0.0;

    std::priority_queue<SimEvent, std::vector<SimEvent>, std::greater<>> queue_;
    std::uint64_t next_seq_ = 0;
    std::size_t events_processed_ = 0;

    PendingQueue pending_;
    std::unique_ptr<Strategy> strategy_;

    std::vector<TaskOutcome> outcomes_;
    std::vector<TaskOutcome>* collecting_ = nullptr;
    std::vector<double> latency_samples_;
    std::size_t failures_ = 0;
    double closed_online_seconds_ = 0.0;

    TraceHook trace_hook_;
    OutcomeHook outcome_hook_;
};

}  // namespace reach

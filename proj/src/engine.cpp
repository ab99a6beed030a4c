#include "reach/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "reach/workload.hpp"

namespace reach {

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::TaskArrival: return "TaskArrival";
        case EventKind::StageComplete: return "StageComplete";
        case EventKind::TaskComplete: return "TaskComplete";
        case EventKind::GpuFailure: return "GpuFailure";
        case EventKind::GpuRecovery: return "GpuRecovery";
        case EventKind::CongestionStart: return "CongestionStart";
        case EventKind::CongestionEnd: return "CongestionEnd";
        case EventKind::PhaseChange: return "PhaseChange";
        case EventKind::SchedulingTick: return "SchedulingTick";
        case EventKind::MetricsTick: return "MetricsTick";
        case EventKind::HorizonEnd: return "HorizonEnd";
    }
    return "?";
}

DispatchRejected::DispatchRejected(TaskId task, std::optional<GpuId> gpu, std::string reason)
    : std::runtime_error("dispatch of task " + std::to_string(task) + " rejected" +
                         (gpu ? " (gpu " + std::to_string(*gpu) + ")" : std::string()) + ": " + reason),
      task_(task),
      gpu_(gpu),
      reason_(std::move(reason)) {}

std::vector<GpuNode> build_fleet(const FleetConfig& fleet, std::span<const GpuModel> models, std::uint64_t seed) {
    std::vector<GpuNode> out;
    if (!fleet.explicit_gpus.empty()) {
        out = fleet.explicit_gpus;
    } else {
        std::vector<double> weights(models.size(), 0.0);
        if (fleet.model_mix.empty()) {
            for (std::size_t i = 0; i < models.size(); ++i) weights[i] = models[i].fleet_weight;
        } else {
            for (const auto& [name, w] : fleet.model_mix) {
                auto it = std::find_if(models.begin(), models.end(),
                                       [&](const GpuModel& m) { return model_name_matches(m.name, name); });
                if (it == models.end()) throw ConfigError("unknown GPU model '" + name + "'");
                weights[static_cast<std::size_t>(it - models.begin())] += w;
            }
        }
        const std::vector<int> quotas = apportion(fleet.n_gpus, weights);
        std::vector<std::size_t> model_of;
        for (std::size_t m = 0; m < quotas.size(); ++m) model_of.insert(model_of.end(), static_cast<std::size_t>(quotas[m]), m);

        Rng rng = make_stream(seed, stream::kFleet);
        std::shuffle(model_of.begin(), model_of.end(), rng);
        std::discrete_distribution<std::size_t> region_pick(fleet.region_mix.begin(), fleet.region_mix.end());
        for (std::size_t m : model_of) {
            const GpuModel& model = models[m];
            GpuNode g;
            g.model_name = model.name;
            g.tflops = model.tflops;
            g.memory_gb = model.memory_gb;
            g.region = static_cast<Region>(region_pick(rng));
            g.hourly_cost_usd = model.hourly_cost_usd;
            g.base_dropout_per_hour = model.base_dropout_per_hour;
            out.push_back(std::move(g));
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].id = static_cast<GpuId>(i);
        if (fleet.dropout_per_hour) out[i].base_dropout_per_hour = *fleet.dropout_per_hour;
    }
    return out;
}

double execution_hours(const TaskSpec& task, std::span<const GpuNode* const> gpus, double p_comm) {
    if (gpus.empty()) throw ContractViolation("execution_time on an empty GPU set");
    double slowest = std::numeric_limits<double>::infinity();
    for (const GpuNode* g : gpus) slowest = std::min(slowest, g->tflops);
    return task.base_hours * (kReferenceTflops / slowest) * p_comm;
}

namespace {

ScenarioConfig validated(ScenarioConfig c) {
    c.validate();
    return c;
}

double clamp_penalty(double bandwidth_gbps) {
    if (std::isinf(bandwidth_gbps)) return 0.0;
    return std::clamp(1.0 - bandwidth_gbps / kReferenceBandwidthGbps, 0.0, 1.0);
}

}  // namespace

Engine::Engine(ScenarioConfig config, std::uint64_t seed)
    : config_(validated(std::move(config))),
      seed_(seed),
      network_(config_.network, make_stream(seed, stream::kNetwork)),
      churn_rng_(make_stream(seed, stream::kChurn)) {
    init(generate(config_.workload, config_.templates, network_.config().phases, seed));
}

Engine::Engine(ScenarioConfig config, std::uint64_t seed, std::vector<TaskSpec> tasks)
    : config_(validated(std::move(config))),
      seed_(seed),
      network_(config_.network, make_stream(seed, stream::kNetwork)),
      churn_rng_(make_stream(seed, stream::kChurn)) {
    init(std::move(tasks));
}

void Engine::init(std::vector<TaskSpec> tasks) {
    gpus_ = build_fleet(config_.fleet, config_.models, seed_);
    if (gpus_.empty()) throw ConfigError("fleet is empty");
    failure_epoch_.assign(gpus_.size(), 0);
    horizon_ = config_.horizon_hours() * kSecondsPerHour;
    best_tflops_ = 0.0;
    for (const auto& m : config_.models) best_tflops_ = std::max(best_tflops_, m.tflops);
    for (const auto& g : gpus_) max_dropout_ = std::max(max_dropout_, dropout_rate(g));

    if (is_baseline(config_.scheduler.name)) strategy_ = make_baseline(config_.scheduler.name, seed_);

    tasks_.reserve(tasks.size());
    for (auto& spec : tasks) {
        spec.id = static_cast<TaskId>(tasks_.size());
        if (!(spec.deadline > spec.arrival) || spec.arrival < 0.0 || spec.gpus_required < 1 || !(spec.base_hours > 0.0)) {
            throw ConfigError("task " + std::to_string(spec.id) + " violates its invariants");
        }
        TaskRecord rec;
        rec.spec = std::move(spec);
        tasks_.push_back(std::move(rec));
    }

    for (const auto& t : tasks_) push(SimEvent{t.spec.arrival, 0, EventKind::TaskArrival, t.spec.id});
    for (auto& g : gpus_) {
        if (g.online) {
            schedule_failure(g);
        } else {
            // Fleet supplied already offline: bring it back on the usual clock.
            g.busy_task.reset();
            push(SimEvent{exponential_mean(churn_rng_, config_.churn.recovery_mean_hours * kSecondsPerHour), 0,
                          EventKind::GpuRecovery, g.id});
        }
    }
    const double day = 24.0 * kSecondsPerHour;
    for (double d = 0.0; d < horizon_; d += day) {
        for (const auto& p : network_.config().phases) {
            const SimTime t = d + p.start_hour * kSecondsPerHour;
            if (t > 0.0 && t < horizon_) push(SimEvent{t, 0, EventKind::PhaseChange, 0});
        }
    }
    push(SimEvent{0.0, 0, EventKind::MetricsTick, 0});
    push(SimEvent{config_.sim.scheduling_tick_s, 0, EventKind::SchedulingTick, 0});
    push(SimEvent{horizon_, 0, EventKind::HorizonEnd, 0});
}

void Engine::push(SimEvent ev) {
    ev.seq = next_seq_++;
    queue_.push(ev);
}

void Engine::schedule_failure(GpuNode& g) {
    const double rate = dropout_rate(g);
    if (rate <= 0.0) return;
    const double wait = exponential_mean(churn_rng_, kSecondsPerHour / rate);
    SimEvent ev{now_ + wait, 0, EventKind::GpuFailure, g.id};
    ev.epoch = ++failure_epoch_[g.id];
    push(ev);
}

std::vector<TaskOutcome> Engine::run_until(SimTime t_end) {
    if (t_end < now_) throw ContractViolation("run_until into the past");
    std::vector<TaskOutcome> collected;
    collecting_ = &collected;
    try {
        while (!queue_.empty() && queue_.top().time <= t_end) {
            const SimEvent ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            ++events_processed_;
            handle(ev);
        }
    } catch (...) {
        collecting_ = nullptr;
        throw;
    }
    collecting_ = nullptr;
    now_ = t_end;
    return collected;
}

std::vector<TaskOutcome> Engine::run() { return run_until(std::max(now_, horizon_)); }

void Engine::handle(const SimEvent& ev) {
    if (finished_) return;
    switch (ev.kind) {
        case EventKind::TaskArrival: on_arrival(ev.subject); break;
        case EventKind::StageComplete: on_stage_complete(ev.subject); break;
        case EventKind::TaskComplete: on_task_complete(ev.subject); break;
        case EventKind::GpuFailure:
            if (ev.epoch == failure_epoch_[ev.subject]) on_gpu_failure(ev.subject);
            break;
        case EventKind::GpuRecovery: on_gpu_recovery(ev.subject); break;
        case EventKind::CongestionStart: {
            const SimTime until = network_.begin_congestion(CongestionEvent{ev.subject, now_, ev.until, ev.factor});
            push(SimEvent{until, 0, EventKind::CongestionEnd, ev.subject});
            const auto& link = network_.links()[ev.subject];
            trace(TraceRow{now_, "congestion_start", {}, {},
                           std::string(to_string(link.a)) + "|" + std::string(to_string(link.b)), {}, {}, {}, {}});
            break;
        }
        case EventKind::CongestionEnd:
            if (network_.end_congestion(ev.subject, now_)) {
                const auto& link = network_.links()[ev.subject];
                trace(TraceRow{now_, "congestion_end", {}, {},
                               std::string(to_string(link.a)) + "|" + std::string(to_string(link.b)), {}, {}, {}, {}});
            }
            break;
        case EventKind::PhaseChange:
            trace(TraceRow{now_, "phase_change", {}, {}, network_.phase(now_).name, {}, {}, {}, {}});
            break;
        case EventKind::SchedulingTick:
            pending_queue_tick();
            if (now_ + config_.sim.scheduling_tick_s < horizon_)
                push(SimEvent{now_ + config_.sim.scheduling_tick_s, 0, EventKind::SchedulingTick, 0});
            break;
        case EventKind::MetricsTick: on_metrics_tick(); break;
        case EventKind::HorizonEnd: on_horizon_end(); break;
    }
}

void Engine::on_arrival(TaskId id) {
    TaskRecord& t = tasks_[id];
    pending_.insert(PendingKey{t.spec.critical, t.spec.arrival, id});
    trace(TraceRow{now_, "arrival", id, {}, std::string(to_string(t.status)), {}, {}, {}, {}});
    pending_queue_tick();
}

DispatchReceipt Engine::dispatch(TaskId id, std::span<const GpuId> gpu_ids) {
    if (finished_) throw DispatchRejected(id, std::nullopt, "simulation finished");
    if (id >= tasks_.size()) throw DispatchRejected(id, std::nullopt, "unknown task");
    TaskRecord& t = tasks_[id];
    const TaskSpec& spec = t.spec;
    if (t.status != TaskStatus::Pending || !pending_.count(PendingKey{spec.critical, spec.arrival, id})) {
        throw DispatchRejected(id, std::nullopt, "task is not pending");
    }
    if (gpu_ids.size() != static_cast<std::size_t>(spec.gpus_required)) {
        throw DispatchRejected(id, std::nullopt,
                               "expected " + std::to_string(spec.gpus_required) + " GPUs, got " +
                                   std::to_string(gpu_ids.size()));
    }
    std::vector<GpuId> sorted(gpu_ids.begin(), gpu_ids.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const GpuId g = sorted[i];
        if (g >= gpus_.size()) throw DispatchRejected(id, g, "unknown gpu");
        if (i > 0 && sorted[i - 1] == g) throw DispatchRejected(id, g, "duplicate gpu");
        const GpuNode& node = gpus_[g];
        if (!node.online) throw DispatchRejected(id, g, "gpu offline");
        if (node.busy_task) throw DispatchRejected(id, g, "gpu busy");
        if (node.memory_gb < spec.mem_per_gpu_gb) throw DispatchRejected(id, g, "insufficient memory");
    }

    std::vector<Region> regions_by_id;
    std::vector<const GpuNode*> nodes;
    for (GpuId g : sorted) {
        regions_by_id.push_back(gpus_[g].region);
        nodes.push_back(&gpus_[g]);
    }
    const CommPenalty penalty = network_.comm_penalty(spec, regions_by_id, now_);

    std::array<bool, kRegionCount> used{};
    for (Region r : regions_by_id) used[index_of(r)] = true;
    double staging_s = 0.0;
    double latency = 0.0;
    for (std::size_t r = 0; r < kRegionCount; ++r) {
        if (!used[r]) continue;
        const auto region = static_cast<Region>(r);
        if (spec.data_volume_gb > 0.0) {
            const double bw = network_.effective_bandwidth(spec.data_region, region, now_);
            staging_s = std::max(staging_s, spec.data_volume_gb * 8.0 / bw);
        }
        latency = std::max(latency, network_.sample_latency_ms(spec.data_region, region));
    }
    const double compute_s = execution_hours(spec, nodes, penalty.p_comm) * kSecondsPerHour;

    t.assigned_gpus.assign(gpu_ids.begin(), gpu_ids.end());
    t.dispatched_at = now_;
    t.p_comm = penalty.p_comm;
    t.bandwidth_eff_gbps = penalty.bandwidth_gbps;
    t.latency_ms = latency;
    latency_samples_.push_back(latency);
    pending_.erase(PendingKey{spec.critical, spec.arrival, id});
    for (GpuId g : sorted) gpus_[g].busy_task = id;

    if (staging_s > 0.0) {
        t.status = TaskStatus::Staging;
        push(SimEvent{now_ + staging_s, 0, EventKind::StageComplete, id});
    } else {
        t.status = TaskStatus::Running;
        t.started_at = now_;
        push(SimEvent{now_ + compute_s, 0, EventKind::TaskComplete, id});
    }

    const double egress = network_.region(spec.data_region).egress_cost_per_gb;
    const CostBreakdown estimate = task_cost(spec, nodes, (staging_s + compute_s) / kSecondsPerHour, egress, config_.models);
    trace(TraceRow{now_, "dispatch", id, t.assigned_gpus, std::string(to_string(t.status)), {}, {}, penalty.p_comm,
                   clamp_penalty(penalty.bandwidth_gbps)});

    return DispatchReceipt{id, staging_s, compute_s, now_ + staging_s + compute_s, penalty.p_comm,
                           penalty.bandwidth_gbps, estimate.usd};
}

void Engine::on_stage_complete(TaskId id) {
    TaskRecord& t = tasks_[id];
    if (t.status != TaskStatus::Staging) return;
    t.status = TaskStatus::Running;
    t.started_at = now_;
    const auto nodes = assigned_nodes(t);
    const double compute_s = execution_hours(t.spec, nodes, t.p_comm) * kSecondsPerHour;
    push(SimEvent{now_ + compute_s, 0, EventKind::TaskComplete, id});
    trace(TraceRow{now_, "start", id, t.assigned_gpus, std::string(to_string(t.status)), {}, {}, {}, {}});
}

void Engine::on_task_complete(TaskId id) {
    TaskRecord& t = tasks_[id];
    if (t.status != TaskStatus::Running) return;
    finalize(t, now_ <= t.spec.deadline ? TaskStatus::CompletedOnTime : TaskStatus::CompletedLate);
    pending_queue_tick();
}

void Engine::on_gpu_failure(GpuId id) {
    GpuNode& g = gpus_[id];
    if (!g.online) return;
    ++failures_;
    closed_online_seconds_ += now_ - g.last_online_at;
    if (g.busy_task) finalize(tasks_[*g.busy_task], TaskStatus::Failed);
    g.online = false;
    g.last_offline_at = now_;
    trace(TraceRow{now_, "gpu_failure", {}, {id}, "offline", {}, {}, {}, {}});
    const double downtime = exponential_mean(churn_rng_, config_.churn.recovery_mean_hours * kSecondsPerHour);
    push(SimEvent{now_ + downtime, 0, EventKind::GpuRecovery, id});
}

void Engine::force_failure(GpuId id) {
    if (finished_) throw ContractViolation("simulation finished");
    if (id >= gpus_.size()) throw ContractViolation("unknown gpu " + std::to_string(id));
    if (!gpus_[id].online) throw ContractViolation("gpu " + std::to_string(id) + " is already offline");
    ++failure_epoch_[id];
    on_gpu_failure(id);
}

void Engine::on_gpu_recovery(GpuId id) {
    GpuNode& g = gpus_[id];
    if (g.online) return;
    g.online = true;
    g.last_online_at = now_;
    schedule_failure(g);
    trace(TraceRow{now_, "gpu_recovery", {}, {id}, "online", {}, {}, {}, {}});
    pending_queue_tick();
}

void Engine::on_metrics_tick() {
    for (const auto& ev : network_.inject_congestion(now_)) {
        push(SimEvent{now_, 0, EventKind::CongestionStart, static_cast<std::uint32_t>(ev.link), ev.factor, ev.end});
    }
    if (now_ + config_.sim.metrics_tick_s < horizon_)
        push(SimEvent{now_ + config_.sim.metrics_tick_s, 0, EventKind::MetricsTick, 0});
}

void Engine::on_horizon_end() {
    for (auto& t : tasks_) {
        if (t.status == TaskStatus::Staging || t.status == TaskStatus::Running) finalize(t, TaskStatus::Failed);
    }
    const std::vector<PendingKey> left(pending_.begin(), pending_.end());
    for (const auto& key : left) finalize(tasks_[key.id], TaskStatus::Expired);
    trace(TraceRow{now_, "horizon_end", {}, {}, {}, {}, {}, {}, {}});
    finished_ = true;
    while (!queue_.empty()) queue_.pop();
}

void Engine::pending_queue_tick() {
    if (pending_.empty()) return;
    const std::vector<PendingKey> order(pending_.begin(), pending_.end());
    // Idle-capacity counts by memory requirement, invalidated on dispatch.
    std::map<double, std::size_t> idle_by_mem;
    for (const auto& key : order) {
        TaskRecord& t = tasks_[key.id];
        if (t.spec.deadline < now_ + minimal_duration_s(t.spec, best_tflops_)) {
            finalize(t, TaskStatus::Expired);
            continue;
        }
        if (!strategy_) continue;

        auto it = idle_by_mem.find(t.spec.mem_per_gpu_gb);
        if (it == idle_by_mem.end()) {
            std::size_t n = 0;
            for (const auto& g : gpus_) n += g.idle() && g.memory_gb >= t.spec.mem_per_gpu_gb;
            it = idle_by_mem.emplace(t.spec.mem_per_gpu_gb, n).first;
        }
        if (it->second < static_cast<std::size_t>(t.spec.gpus_required)) continue;

        const CandidateSet cands = filter_candidates(t.spec, gpus_, now_);
        const std::vector<GpuId> chosen = strategy_->select(*this, t, cands);
        dispatch(key.id, chosen);
        idle_by_mem.clear();
    }
}

void Engine::release(TaskRecord& t, std::optional<GpuId>) {
    for (GpuId g : t.assigned_gpus) {
        if (gpus_[g].busy_task == t.spec.id) gpus_[g].busy_task.reset();
    }
}

void Engine::finalize(TaskRecord& t, TaskStatus status) {
    if (t.status == TaskStatus::Pending) pending_.erase(PendingKey{t.spec.critical, t.spec.arrival, t.spec.id});
    if (t.status == TaskStatus::Staging || t.status == TaskStatus::Running) release(t);
    t.status = status;
    t.finished_at = now_;

    TaskOutcome outcome = make_outcome(t);
    outcomes_.push_back(outcome);
    if (collecting_) collecting_->push_back(outcome);

    static constexpr std::string_view kEventName[] = {"", "", "", "complete", "complete", "fail", "expire"};
    trace(TraceRow{now_, std::string(kEventName[static_cast<std::size_t>(status)]), t.spec.id, t.assigned_gpus,
                   std::string(to_string(status)),
                   outcome.components ? std::optional<double>(outcome.reward()) : std::nullopt,
                   outcome.total_cost_usd,
                   t.dispatched_at ? std::optional<double>(t.p_comm) : std::nullopt, outcome.bandwidth_penalty});
    if (outcome_hook_) outcome_hook_(outcome);
}

std::vector<const GpuNode*> Engine::assigned_nodes(const TaskRecord& t) const {
    std::vector<const GpuNode*> nodes;
    for (GpuId g : t.assigned_gpus) nodes.push_back(&gpus_[g]);
    return nodes;
}

TaskOutcome Engine::make_outcome(const TaskRecord& t) const {
    TaskOutcome o;
    o.task_id = t.spec.id;
    o.status = t.status;
    o.critical = t.spec.critical;
    o.arrival = t.spec.arrival;
    o.finished_at = t.finished_at.value_or(now_);
    o.gpus = t.assigned_gpus;
    o.turnaround_s = o.finished_at - t.spec.arrival;
    o.ideal_s = ideal_seconds(t.spec, config_.models);
    if (t.dispatched_at) {
        const auto nodes = assigned_nodes(t);
        const double billed_h = (o.finished_at - *t.dispatched_at) / kSecondsPerHour;
        const double egress = network_.region(t.spec.data_region).egress_cost_per_gb;
        const CostBreakdown cost = task_cost(t.spec, nodes, billed_h, egress, config_.models);
        o.total_cost_usd = cost.usd;
        o.c_norm = cost.c_norm;
        o.p_comm = t.p_comm;
        o.bandwidth_penalty = clamp_penalty(t.bandwidth_eff_gbps);
    }
    if (t.status != TaskStatus::Expired) {
        o.components = reward_components(t.status, o.c_norm, o.p_comm, config_.reward);
    }
    return o;
}

void Engine::trace(TraceRow row) const {
    if (trace_hook_) trace_hook_(row);
}

ChurnStats Engine::churn_stats() const {
    ChurnStats s;
    s.failures = failures_;
    double seconds = closed_online_seconds_;
    for (const auto& g : gpus_) {
        if (g.online) seconds += now_ - g.last_online_at;
    }
    s.online_gpu_hours = seconds / kSecondsPerHour;
    return s;
}

CandidateSet Engine::candidates(TaskId id) const { return filter_candidates(tasks_.at(id).spec, gpus_, now_); }

MetricsReport Engine::metrics() const {
    return compute_metrics(outcomes_, config_.horizon_hours(), latency_samples_);
}

void Engine::check_invariants() const {
    std::size_t busy = 0;
    for (const auto& g : gpus_) {
        if (g.busy_task) {
            ++busy;
            if (!g.online) throw ContractViolation("offline GPU " + std::to_string(g.id) + " holds a task");
            const auto& t = tasks_[*g.busy_task];
            if (t.status != TaskStatus::Staging && t.status != TaskStatus::Running)
                throw ContractViolation("GPU " + std::to_string(g.id) + " holds a task that is not executing");
        }
    }
    std::size_t demand = 0;
    for (const auto& t : tasks_) {
        if (t.status == TaskStatus::Staging || t.status == TaskStatus::Running) {
            demand += static_cast<std::size_t>(t.spec.gpus_required);
            if (t.assigned_gpus.size() != static_cast<std::size_t>(t.spec.gpus_required))
                throw ContractViolation("task " + std::to_string(t.spec.id) + " assignment size mismatch");
        }
    }
    if (busy != demand) throw ContractViolation("occupancy not conserved");
}

}  // namespace reach

#include "reach/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace reach {

namespace {

double unit(double x) { return std::clamp(x, 0.0, 1.0); }

double hours_feature(double seconds) { return std::min(seconds / kSecondsPerHour, 24.0) / 24.0; }

}  // namespace

TaskFeatures encode_task(const TaskSpec& task, SimTime now) {
    TaskFeatures f{};
    f[0] = unit(task.gpus_required / 32.0);
    f[1] = unit(task.mem_per_gpu_gb / 80.0);
    f[2] = unit((task.deadline - now) / kSecondsPerHour / 24.0);
    f[3] = task.critical ? 1.0 : 0.0;
    f[4 + static_cast<std::size_t>(task.comm_profile)] = 1.0;
    f[8 + index_of(task.data_region)] = 1.0;
    return f;
}

GpuFeatures encode_gpu(const GpuNode& gpu, const TaskSpec& task, const Engine& engine) {
    const Network& net = engine.network();
    const SimTime now = engine.now();
    GpuFeatures f{};
    f[0] = unit(gpu.tflops / 1000.0);
    f[1] = unit(gpu.memory_gb / 80.0);
    f[2 + index_of(gpu.region)] = 1.0;
    f[8] = unit(gpu.hourly_cost_usd / 2.5);
    const double max_rate = engine.max_dropout_rate();
    f[9] = max_rate > 0.0 ? unit(engine.dropout_rate(gpu) / max_rate) : 0.0;
    f[10] = gpu.last_offline_at ? hours_feature(now - *gpu.last_offline_at) : 1.0;
    f[11] = gpu.online ? hours_feature(now - gpu.last_online_at) : 0.0;
    f[12] = unit(net.expected_bandwidth(task.data_region, gpu.region, now) / kReferenceBandwidthGbps);
    f[13] = unit(net.latency_ms(task.data_region, gpu.region) / 500.0);
    const bool local = gpu.region == task.data_region;
    f[14] = local ? 1.0 : 0.0;
    // Egress this placement would pay: data leaves its region only when remote.
    f[15] = local ? 0.0 : unit(net.region(task.data_region).egress_cost_per_gb / 0.1);
    return f;
}

GlobalFeatures encode_global(const Engine& engine) {
    const double h = hour_of_day(engine.now());
    const auto gpus = engine.gpus();
    std::size_t online = 0, idle = 0;
    for (const auto& g : gpus) {
        online += g.online;
        idle += g.idle();
    }
    const double n = static_cast<double>(gpus.size());
    GlobalFeatures f{};
    f[0] = std::sin(2.0 * std::numbers::pi * h / 24.0);
    f[1] = std::cos(2.0 * std::numbers::pi * h / 24.0);
    f[2] = online / n;
    f[3] = idle / n;
    f[4] = unit(static_cast<double>(engine.pending().size()) / 100.0);
    f[5] = engine.network().congested_fraction(engine.now());
    return f;
}

Observation encode_observation(const TaskRecord& task, const CandidateSet& cands, const Engine& engine) {
    if (cands.gpus.empty()) throw ContractViolation("observation with no candidates");
    Observation obs;
    obs.task_id = task.spec.id;
    obs.k = task.spec.gpus_required;
    obs.task = encode_task(task.spec, engine.now());
    obs.global = encode_global(engine);
    obs.gpu_ids = cands.gpus;
    obs.gpus.reserve(cands.gpus.size());
    for (GpuId id : cands.gpus) obs.gpus.push_back(encode_gpu(engine.gpus()[id], task.spec, engine));
    return obs;
}

bool features_in_range(const Observation& obs) {
    auto ok = [](double x, double lo, double hi) { return std::isfinite(x) && x >= lo && x <= hi; };
    for (double x : obs.task) {
        if (!ok(x, 0.0, 1.0)) return false;
    }
    for (const auto& g : obs.gpus) {
        for (double x : g) {
            if (!ok(x, 0.0, 1.0)) return false;
        }
    }
    for (std::size_t i = 0; i < obs.global.size(); ++i) {
        if (!ok(obs.global[i], i < 2 ? -1.0 : 0.0, 1.0)) return false;
    }
    return obs.gpu_ids.size() == obs.gpus.size() && std::is_sorted(obs.gpu_ids.begin(), obs.gpu_ids.end());
}

std::uint64_t digest(const Observation& obs) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    mix(&obs.task_id, sizeof obs.task_id);
    mix(obs.task.data(), sizeof(double) * obs.task.size());
    mix(obs.global.data(), sizeof(double) * obs.global.size());
    mix(obs.gpu_ids.data(), sizeof(GpuId) * obs.gpu_ids.size());
    for (const auto& g : obs.gpus) mix(g.data(), sizeof(double) * g.size());
    return h;
}

}  // namespace reach

#include "reach/scheduling.hpp"

#include <algorithm>
#include <iterator>
#include <string>

#include "reach/engine.hpp"

namespace reach {

bool CandidateSet::contains(GpuId id) const { return std::binary_search(gpus.begin(), gpus.end(), id); }

InsufficientCandidates::InsufficientCandidates(std::size_t have, int need)
    : std::runtime_error("insufficient candidates: have " + std::to_string(have) + ", need " + std::to_string(need)) {}

CandidateSet filter_candidates(const TaskSpec& task, std::span<const GpuNode> fleet, SimTime now) {
    CandidateSet c{task.id, {}, now};
    for (const auto& g : fleet) {
        if (g.idle() && g.memory_gb >= task.mem_per_gpu_gb) c.gpus.push_back(g.id);
    }
    return c;
}

namespace {

void require(const CandidateSet& cands, int k) {
    if (k < 1 || cands.size() < static_cast<std::size_t>(k)) throw InsufficientCandidates(cands.size(), k);
}

}  // namespace

std::vector<GpuId> greedy_select(const CandidateSet& cands, std::span<const GpuNode> fleet, int k) {
    require(cands, k);
    std::vector<GpuId> ids = cands.gpus;
    auto better = [&](GpuId a, GpuId b) {
        const auto& ga = fleet[a];
        const auto& gb = fleet[b];
        if (ga.tflops != gb.tflops) return ga.tflops > gb.tflops;
        if (ga.hourly_cost_usd != gb.hourly_cost_usd) return ga.hourly_cost_usd < gb.hourly_cost_usd;
        return a < b;
    };
    std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), better);
    ids.resize(static_cast<std::size_t>(k));
    return ids;
}

std::vector<GpuId> random_select(const CandidateSet& cands, int k, Rng& rng) {
    require(cands, k);
    std::vector<GpuId> out;
    out.reserve(static_cast<std::size_t>(k));
    std::sample(cands.gpus.begin(), cands.gpus.end(), std::back_inserter(out), k, rng);
    return out;
}

std::vector<GpuId> roundrobin_select(const CandidateSet& cands, int k, std::size_t& pointer, std::size_t fleet_size) {
    require(cands, k);
    std::vector<GpuId> out;
    out.reserve(static_cast<std::size_t>(k));
    std::size_t pos = pointer % fleet_size;
    for (std::size_t step = 0; step < fleet_size && out.size() < static_cast<std::size_t>(k); ++step) {
        const auto id = static_cast<GpuId>(pos);
        pos = (pos + 1) % fleet_size;
        if (cands.contains(id)) out.push_back(id);
    }
    if (out.size() < static_cast<std::size_t>(k)) throw InsufficientCandidates(out.size(), k);
    pointer = pos;
    return out;
}

std::vector<GpuId> GreedyStrategy::select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) {
    return greedy_select(cands, engine.gpus(), task.spec.gpus_required);
}

std::vector<GpuId> RandomStrategy::select(const Engine&, const TaskRecord& task, const CandidateSet& cands) {
    return random_select(cands, task.spec.gpus_required, rng_);
}

std::vector<GpuId> RoundRobinStrategy::select(const Engine& engine, const TaskRecord& task,
                                              const CandidateSet& cands) {
    return roundrobin_select(cands, task.spec.gpus_required, pointer_, engine.gpus().size());
}

bool is_baseline(std::string_view name) { return name == "greedy" || name == "random" || name == "roundrobin"; }

std::unique_ptr<Strategy> make_baseline(std::string_view name, std::uint64_t seed) {
    if (name == "greedy") return std::make_unique<GreedyStrategy>();
    if (name == "random") return std::make_unique<RandomStrategy>(make_stream(seed, stream::kScheduling));
    if (name == "roundrobin") return std::make_unique<RoundRobinStrategy>();
    throw ConfigError("unknown baseline scheduler '" + std::string(name) + "'");
}

double minimal_duration_s(const TaskSpec& task, double best_tflops) {
    return task.base_hours * kSecondsPerHour * kReferenceTflops / best_tflops;
}

}  // namespace reach

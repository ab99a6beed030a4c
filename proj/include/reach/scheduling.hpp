#pragma once

#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "reach/rng.hpp"
#include "reach/types.hpp"

namespace reach {

class Engine;

struct CandidateSet {
    TaskId task_id = 0;
    std::vector<GpuId> gpus;  // ascending id
    SimTime snapshot_time = 0.0;

    std::size_t size() const { return gpus.size(); }
    bool contains(GpuId id) const;
};

class InsufficientCandidates : public std::runtime_error {
public:
    InsufficientCandidates(std::size_t have, int need);
};

// Online, idle and memory-sufficient GPUs. fleet[i].id must equal i.
CandidateSet filter_candidates(const TaskSpec& task, std::span<const GpuNode> fleet, SimTime now);

// Top-k by TFLOPS; ties by lower hourly cost, then lower id.
std::vector<GpuId> greedy_select(const CandidateSet& cands, std::span<const GpuNode> fleet, int k);
// Uniform k-subset without replacement.
std::vector<GpuId> random_select(const CandidateSet& cands, int k, Rng& rng);
// Walks ids pointer, pointer+1, ... (mod fleet_size) taking candidates until k
// are found; pointer ends one past the last taken id.
std::vector<GpuId> roundrobin_select(const CandidateSet& cands, int k, std::size_t& pointer, std::size_t fleet_size);

class Strategy {
public:
    virtual ~Strategy() = default;
    virtual std::string_view name() const = 0;
    // cands.size() >= task.gpus_required is guaranteed by the caller.
    virtual std::vector<GpuId> select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) = 0;
};

class GreedyStrategy final : public Strategy {
public:
    std::string_view name() const override { return "greedy"; }
    std::vector<GpuId> select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) override;
};

class RandomStrategy final : public Strategy {
public:
    explicit RandomStrategy(Rng rng) : rng_(std::move(rng)) {}
    std::string_view name() const override { return "random"; }
    std::vector<GpuId> select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) override;

private:
    Rng rng_;
};

class RoundRobinStrategy final : public Strategy {
public:
    std::string_view name() const override { return "roundrobin"; }
    std::vector<GpuId> select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) override;
    std::size_t pointer() const { return pointer_; }

private:
    std::size_t pointer_ = 0;
};

bool is_baseline(std::string_view name);
// greedy | random | roundrobin; the random stream is derived from seed.
std::unique_ptr<Strategy> make_baseline(std::string_view name, std::uint64_t seed);

// Scan order: critical tasks first, then FIFO by arrival, then id.
struct PendingKey {
    bool critical = false;
    SimTime arrival = 0.0;
    TaskId id = 0;

    bool operator<(const PendingKey& o) const {
        if (critical != o.critical) return critical;
        if (arrival != o.arrival) return arrival < o.arrival;
        return id < o.id;
    }
};

using PendingQueue = std::set<PendingKey>;

// Lower bound on any execution: reference hours scaled to the fastest model, no communication penalty.
double minimal_duration_s(const TaskSpec& task, double best_tflops);

}  // namespace reach

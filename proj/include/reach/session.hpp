#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reach/config.hpp"
#include "reach/engine.hpp"
#include "reach/protocol.hpp"
#include "reach/transport.hpp"

namespace reach {

struct DecisionRecord {
    std::uint64_t decision_id = 0;
    TaskId task_id = 0;
    std::uint64_t observation_digest = 0;
    std::vector<GpuId> chosen;
    SimTime dispatch_time = 0.0;
    bool open = true;
};

struct SessionStats {
    std::size_t observes = 0;
    std::size_t accepted = 0;
    std::size_t nacks = 0;
    std::size_t timeouts = 0;
    std::size_t rewards = 0;
};

// Agent closed the session while a decision was outstanding.
class AgentClosed : public std::runtime_error {
public:
    AgentClosed() : std::runtime_error("agent closed the session") {}
};

// Agent asked for a new episode while one was running.
class EpisodeRestart : public std::runtime_error {
public:
    explicit EpisodeRestart(std::optional<std::uint64_t> seed)
        : std::runtime_error("episode restarted by agent"), seed(seed) {}
    std::optional<std::uint64_t> seed;
};

// Returns the nack reason for an act, or nullopt if it is a valid k-subset of
// the candidates.
std::optional<std::string_view> check_act(const std::vector<GpuId>& chosen, int k, const CandidateSet& cands);

// Strategy that asks the remote agent. Invalid or late answers are nacked and
// replaced by a uniform draw from the agent-sampling stream; those decisions
// get no record and therefore no reward message.
class AgentStrategy final : public Strategy {
public:
    AgentStrategy(LineTransport& transport, std::chrono::milliseconds timeout, Rng fallback_rng);

    std::string_view name() const override { return "agent"; }
    std::vector<GpuId> select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) override;

    // Closes the matching record and sends its reward message.
    void on_outcome(const TaskOutcome& outcome);

    const std::vector<DecisionRecord>& records() const { return records_; }
    const SessionStats& stats() const { return stats_; }
    std::size_t open_records() const { return open_by_task_.size(); }

private:
    void send(const protocol::Message& m);

    LineTransport& transport_;
    std::chrono::milliseconds timeout_;
    Rng fallback_rng_;
    std::uint64_t next_decision_ = 1;
    std::vector<DecisionRecord> records_;
    std::map<TaskId, std::size_t> open_by_task_;
    SessionStats stats_;
};

struct SessionOptions {
    std::string mode = "train";
    std::uint64_t default_seed = 1;
};

struct EpisodeResult {
    std::uint64_t seed = 0;
    MetricsReport metrics;
    SessionStats stats;
    std::size_t open_at_end = 0;
};

// One engine per episode. Protocol: hello, then any number of reset/episode
// cycles, then close/bye.
class Session {
public:
    Session(ScenarioConfig config, LineTransport& transport, SessionOptions options = {});

    // Runs until the agent sends close or disconnects. Malformed input sends
    // an error message and rethrows as protocol::ProtocolError.
    std::vector<EpisodeResult> serve();

    // Optional trace sink applied to every episode's engine.
    void set_trace_hook(Engine::TraceHook hook) { trace_hook_ = std::move(hook); }
    // Called with the seed before each episode's engine starts.
    void set_episode_hook(std::function<void(std::uint64_t)> hook) { episode_hook_ = std::move(hook); }

private:
    EpisodeResult run_episode(std::uint64_t seed);
    void send(const protocol::Message& m);

    ScenarioConfig config_;
    LineTransport& transport_;
    SessionOptions options_;
    Engine::TraceHook trace_hook_;
    std::function<void(std::uint64_t)> episode_hook_;
};

int k_max(const ScenarioConfig& config);

}  // namespace reach

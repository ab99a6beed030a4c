#include "reach/session.hpp"

#include <algorithm>

#include "reach/features.hpp"

namespace reach {

namespace pr = protocol;

std::optional<std::string_view> check_act(const std::vector<GpuId>& chosen, int k, const CandidateSet& cands) {
    if (chosen.size() != static_cast<std::size_t>(k)) return pr::kWrongK;
    std::vector<GpuId> sorted = chosen;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return pr::kDuplicateId;
    for (GpuId g : sorted) {
        if (!cands.contains(g)) return pr::kNotInCandidateSet;
    }
    return std::nullopt;
}

AgentStrategy::AgentStrategy(LineTransport& transport, std::chrono::milliseconds timeout, Rng fallback_rng)
    : transport_(transport), timeout_(timeout), fallback_rng_(std::move(fallback_rng)) {}

void AgentStrategy::send(const pr::Message& m) { transport_.send_line(pr::encode(m)); }

std::vector<GpuId> AgentStrategy::select(const Engine& engine, const TaskRecord& task, const CandidateSet& cands) {
    const int k = task.spec.gpus_required;
    const Observation obs = encode_observation(task, cands, engine);
    const std::uint64_t id = next_decision_++;
    send(pr::make_observe(id, obs));
    ++stats_.observes;

    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + timeout_;
    while (true) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
        std::optional<std::string> line;
        if (left.count() > 0) line = transport_.recv_line(left);
        if (!line) {
            send(pr::Nack{id, std::string(pr::kTimeout)});
            ++stats_.nacks;
            ++stats_.timeouts;
            return random_select(cands, k, fallback_rng_);
        }
        const pr::Message msg = pr::decode(*line);
        if (const auto* act = std::get_if<pr::Act>(&msg)) {
            if (act->decision_id != id) {
                send(pr::Nack{act->decision_id, std::string(pr::kStaleDecision)});
                ++stats_.nacks;
                continue;
            }
            if (const auto reason = check_act(act->chosen, k, cands)) {
                send(pr::Nack{id, std::string(*reason)});
                ++stats_.nacks;
                return random_select(cands, k, fallback_rng_);
            }
            ++stats_.accepted;
            records_.push_back(DecisionRecord{id, task.spec.id, digest(obs), act->chosen, engine.now(), true});
            open_by_task_[task.spec.id] = records_.size() - 1;
            return act->chosen;
        }
        if (std::holds_alternative<pr::Close>(msg)) throw AgentClosed();
        if (const auto* reset = std::get_if<pr::Reset>(&msg)) throw EpisodeRestart(reset->seed);
        throw pr::ProtocolError("unexpected '" + std::string(pr::kind_of(msg)) + "' while awaiting act");
    }
}

void AgentStrategy::on_outcome(const TaskOutcome& outcome) {
    const auto it = open_by_task_.find(outcome.task_id);
    if (it == open_by_task_.end()) return;
    DecisionRecord& rec = records_[it->second];
    open_by_task_.erase(it);
    if (!outcome.components) throw ContractViolation("decision closed without a reward");
    rec.open = false;
    send(pr::Reward{rec.decision_id, outcome.task_id, outcome.reward(), *outcome.components,
                    std::string(to_string(outcome.status))});
    ++stats_.rewards;
}

int k_max(const ScenarioConfig& config) {
    int k = 1;
    for (const auto& t : config.templates) k = std::max(k, t.gpus_required);
    return k;
}

Session::Session(ScenarioConfig config, LineTransport& transport, SessionOptions options)
    : config_(std::move(config)), transport_(transport), options_(std::move(options)) {
    config_.scheduler.name = "agent";
    config_.validate();
}

void Session::send(const pr::Message& m) { transport_.send_line(pr::encode(m)); }

std::vector<EpisodeResult> Session::serve() {
    std::vector<EpisodeResult> results;
    try {
        send(pr::Hello{pr::kVersion, options_.mode, k_max(config_), {}});
        std::optional<std::uint64_t> restart;
        while (true) {
            std::optional<std::uint64_t> seed;
            if (restart) {
                seed = restart;
                restart.reset();
            } else {
                const auto line = transport_.recv_line(std::nullopt);
                const pr::Message msg = pr::decode(*line);
                if (std::holds_alternative<pr::Close>(msg)) break;
                if (const auto* act = std::get_if<pr::Act>(&msg)) {
                    send(pr::Nack{act->decision_id, std::string(pr::kStaleDecision)});
                    continue;
                }
                const auto* reset = std::get_if<pr::Reset>(&msg);
                if (!reset) throw pr::ProtocolError("unexpected '" + std::string(pr::kind_of(msg)) + "' between episodes");
                seed = reset->seed.value_or(options_.default_seed);
            }
            try {
                results.push_back(run_episode(*seed));
            } catch (const EpisodeRestart& r) {
                restart = r.seed.value_or(options_.default_seed);
            }
        }
        send(pr::Bye{});
    } catch (const AgentClosed&) {
        send(pr::Bye{});
    } catch (const TransportClosed&) {
        // agent went away; nothing left to say
    } catch (const pr::ProtocolError& e) {
        try {
            send(pr::Error{e.what()});
        } catch (const TransportError&) {
        }
        throw;
    }
    return results;
}

EpisodeResult Session::run_episode(std::uint64_t seed) {
    if (episode_hook_) episode_hook_(seed);
    Engine engine(config_, seed);
    auto agent = std::make_unique<AgentStrategy>(
        transport_,
        std::chrono::milliseconds(static_cast<long long>(config_.scheduler.agent_timeout_s * 1000.0)),
        make_stream(seed, stream::kAgentSampling));
    AgentStrategy* a = agent.get();
    engine.set_strategy(std::move(agent));
    engine.set_outcome_hook([a](const TaskOutcome& o) { a->on_outcome(o); });
    if (trace_hook_) engine.set_trace_hook(trace_hook_);
    engine.run();

    EpisodeResult r;
    r.seed = seed;
    r.metrics = engine.metrics();
    r.stats = a->stats();
    r.open_at_end = a->open_records();
    send(pr::EpisodeEnd{to_json(r.metrics)});
    return r;
}

}  // namespace reach

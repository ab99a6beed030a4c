#include "reach/protocol.hpp"

namespace reach::protocol {

using json = nlohmann::ordered_json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

const json& field(const json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end()) throw ProtocolError(std::string("missing field '") + name + "'");
    return *it;
}

double get_double(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number()) throw ProtocolError(std::string("field '") + name + "' must be a number");
    return v.get<double>();
}

std::uint64_t get_u64(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_unsigned()) throw ProtocolError(std::string("field '") + name + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

std::uint32_t get_u32(const json& j, const char* name) {
    const std::uint64_t v = get_u64(j, name);
    if (v > 0xffffffffULL) throw ProtocolError(std::string("field '") + name + "' out of range");
    return static_cast<std::uint32_t>(v);
}

int get_int(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_number_integer()) throw ProtocolError(std::string("field '") + name + "' must be an integer");
    return v.get<int>();
}

std::string get_string(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_string()) throw ProtocolError(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
}

std::vector<double> get_doubles(const json& j, const char* name) {
    const json& v = field(j, name);
    if (!v.is_array()) throw ProtocolError(std::string("field '") + name + "' must be an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw ProtocolError(std::string("field '") + name + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

json components_json(const RewardComponents& c) {
    return {{"comp", c.comp}, {"deadline", c.deadline}, {"fail", c.fail}, {"cost", c.cost}, {"comm", c.comm}};
}

}  // namespace

std::string_view kind_of(const Message& m) {
    return std::visit(overloaded{
                          [](const Hello&) { return std::string_view("hello"); },
                          [](const Observe&) { return std::string_view("observe"); },
                          [](const Reward&) { return std::string_view("reward"); },
                          [](const Nack&) { return std::string_view("nack"); },
                          [](const EpisodeEnd&) { return std::string_view("episode_end"); },
                          [](const Error&) { return std::string_view("error"); },
                          [](const Bye&) { return std::string_view("bye"); },
                          [](const Act&) { return std::string_view("act"); },
                          [](const Reset&) { return std::string_view("reset"); },
                          [](const Close&) { return std::string_view("close"); },
                      },
                      m);
}

json to_json(const Message& m) {
    json body = std::visit(
        overloaded{
            [](const Hello& h) -> json {
                return {{"protocol_version", h.protocol_version},
                        {"mode", h.mode},
                        {"k_max", h.k_max},
                        {"feature_dims",
                         {{"task", h.feature_dims.task}, {"gpu", h.feature_dims.gpu}, {"global", h.feature_dims.global}}}};
            },
            [](const Observe& o) -> json {
                json cands = json::array();
                for (const auto& c : o.candidates) cands.push_back({{"gpu_id", c.gpu_id}, {"features", c.features}});
                return {{"decision_id", o.decision_id},     {"task_id", o.task_id},
                        {"k", o.k},                         {"task_features", o.task_features},
                        {"global_features", o.global_features}, {"candidates", std::move(cands)}};
            },
            [](const Reward& r) -> json {
                return {{"decision_id", r.decision_id},
                        {"task_id", r.task_id},
                        {"reward", r.reward},
                        {"components", components_json(r.components)},
                        {"terminal_status", r.terminal_status}};
            },
            [](const Nack& n) -> json { return {{"decision_id", n.decision_id}, {"reason", n.reason}}; },
            [](const EpisodeEnd& e) -> json { return {{"metrics", e.metrics}}; },
            [](const Error& e) -> json { return {{"message", e.message}}; },
            [](const Bye&) -> json { return json::object(); },
            [](const Act& a) -> json { return {{"decision_id", a.decision_id}, {"chosen", a.chosen}}; },
            [](const Reset& r) -> json {
                json j = json::object();
                if (r.seed) j["seed"] = *r.seed;
                return j;
            },
            [](const Close&) -> json { return json::object(); },
        },
        m);
    json j = {{"kind", std::string(kind_of(m))}};
    for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = *it;
    return j;
}

Message from_json(const json& j) {
    if (!j.is_object()) throw ProtocolError("message must be a JSON object");
    const std::string kind = get_string(j, "kind");
    if (kind == "hello") {
        Hello h;
        h.protocol_version = get_int(j, "protocol_version");
        h.mode = get_string(j, "mode");
        h.k_max = get_int(j, "k_max");
        const json& d = field(j, "feature_dims");
        h.feature_dims = FeatureDims{get_int(d, "task"), get_int(d, "gpu"), get_int(d, "global")};
        return h;
    }
    if (kind == "observe") {
        Observe o;
        o.decision_id = get_u64(j, "decision_id");
        o.task_id = get_u32(j, "task_id");
        o.k = get_int(j, "k");
        o.task_features = get_doubles(j, "task_features");
        o.global_features = get_doubles(j, "global_features");
        const json& cands = field(j, "candidates");
        if (!cands.is_array()) throw ProtocolError("field 'candidates' must be an array");
        for (const auto& c : cands) o.candidates.push_back(Candidate{get_u32(c, "gpu_id"), get_doubles(c, "features")});
        return o;
    }
    if (kind == "reward") {
        Reward r;
        r.decision_id = get_u64(j, "decision_id");
        r.task_id = get_u32(j, "task_id");
        r.reward = get_double(j, "reward");
        const json& c = field(j, "components");
        r.components = RewardComponents{get_double(c, "comp"), get_double(c, "deadline"), get_double(c, "fail"),
                                        get_double(c, "cost"), get_double(c, "comm")};
        r.terminal_status = get_string(j, "terminal_status");
        return r;
    }
    if (kind == "nack") return Nack{get_u64(j, "decision_id"), get_string(j, "reason")};
    if (kind == "episode_end") {
        const json& m = field(j, "metrics");
        if (!m.is_object()) throw ProtocolError("field 'metrics' must be an object");
        return EpisodeEnd{m};
    }
    if (kind == "error") return Error{get_string(j, "message")};
    if (kind == "bye") return Bye{};
    if (kind == "act") {
        Act a;
        a.decision_id = get_u64(j, "decision_id");
        const json& chosen = field(j, "chosen");
        if (!chosen.is_array()) throw ProtocolError("field 'chosen' must be an array");
        for (const auto& g : chosen) {
            if (!g.is_number_unsigned() || g.get<std::uint64_t>() > 0xffffffffULL)
                throw ProtocolError("field 'chosen' must hold gpu ids");
            a.chosen.push_back(g.get<GpuId>());
        }
        return a;
    }
    if (kind == "reset") {
        Reset r;
        if (const auto it = j.find("seed"); it != j.end() && !it->is_null()) r.seed = get_u64(j, "seed");
        return r;
    }
    if (kind == "close") return Close{};
    throw ProtocolError("unknown message kind '" + kind + "'");
}

std::string encode(const Message& m) { return to_json(m).dump(); }

Message decode(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ProtocolError(std::string("malformed JSON: ") + e.what());
    }
    return from_json(j);
}

Observe make_observe(std::uint64_t decision_id, const Observation& obs) {
    Observe o;
    o.decision_id = decision_id;
    o.task_id = obs.task_id;
    o.k = obs.k;
    o.task_features.assign(obs.task.begin(), obs.task.end());
    o.global_features.assign(obs.global.begin(), obs.global.end());
    for (std::size_t i = 0; i < obs.gpu_ids.size(); ++i)
        o.candidates.push_back(Candidate{obs.gpu_ids[i], std::vector<double>(obs.gpus[i].begin(), obs.gpus[i].end())});
    return o;
}

}  // namespace reach::protocol

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "reach/accounting.hpp"
#include "reach/features.hpp"

namespace reach::protocol {

inline constexpr int kVersion = 1;

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FeatureDims {
    int task = static_cast<int>(kTaskFeatureDim);
    int gpu = static_cast<int>(kGpuFeatureDim);
    int global = static_cast<int>(kGlobalFeatureDim);
    bool operator==(const FeatureDims&) const = default;
};

// server -> agent

struct Hello {
    int protocol_version = kVersion;
    std::string mode = "train";  // train | eval
    int k_max = 1;
    FeatureDims feature_dims;
    bool operator==(const Hello&) const = default;
};

struct Candidate {
    GpuId gpu_id = 0;
    std::vector<double> features;
    bool operator==(const Candidate&) const = default;
};

struct Observe {
    std::uint64_t decision_id = 0;
    TaskId task_id = 0;
    int k = 1;
    std::vector<double> task_features;
    std::vector<double> global_features;
    std::vector<Candidate> candidates;
    bool operator==(const Observe&) const = default;
};

struct Reward {
    std::uint64_t decision_id = 0;
    TaskId task_id = 0;
    double reward = 0.0;
    RewardComponents components;
    std::string terminal_status;
    bool operator==(const Reward&) const = default;
};

struct Nack {
    std::uint64_t decision_id = 0;
    std::string reason;
    bool operator==(const Nack&) const = default;
};

struct EpisodeEnd {
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    bool operator==(const EpisodeEnd&) const = default;
};

struct Error {
    std::string message;
    bool operator==(const Error&) const = default;
};

struct Bye {
    bool operator==(const Bye&) const = default;
};

// agent -> server

struct Act {
    std::uint64_t decision_id = 0;
    std::vector<GpuId> chosen;
    bool operator==(const Act&) const = default;
};

struct Reset {
    std::optional<std::uint64_t> seed;
    bool operator==(const Reset&) const = default;
};

struct Close {
    bool operator==(const Close&) const = default;
};

using Message = std::variant<Hello, Observe, Reward, Nack, EpisodeEnd, Error, Bye, Act, Reset, Close>;

// Nack reasons.
inline constexpr std::string_view kWrongK = "wrong-k";
inline constexpr std::string_view kDuplicateId = "duplicate-id";
inline constexpr std::string_view kNotInCandidateSet = "not-in-candidate-set";
inline constexpr std::string_view kTimeout = "timeout";
inline constexpr std::string_view kStaleDecision = "stale-decision";

std::string_view kind_of(const Message& m);

nlohmann::ordered_json to_json(const Message& m);
Message from_json(const nlohmann::ordered_json& j);

// One line, no trailing newline. Doubles use the shortest decimal form that
// parses back to the same value.
std::string encode(const Message& m);
// Throws ProtocolError on malformed JSON, unknown kinds or bad fields.
Message decode(std::string_view line);

Observe make_observe(std::uint64_t decision_id, const Observation& obs);

}  // namespace reach::protocol

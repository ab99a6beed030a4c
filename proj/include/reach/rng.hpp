#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace reach {

using Rng = std::mt19937_64;

// Independent stream names; each consumer seeds its own generator from
// (run seed, stream name) so adding draws to one stream never shifts another.
namespace stream {
inline constexpr std::string_view kChurn = "churn";
inline constexpr std::string_view kWorkload = "workload";
inline constexpr std::string_view kNetwork = "network";
inline constexpr std::string_view kScheduling = "scheduling";
inline constexpr std::string_view kAgentSampling = "agent-sampling";
inline constexpr std::string_view kFleet = "fleet";
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h));
}

inline Rng make_stream(std::uint64_t seed, std::string_view name) {
    return Rng(derive_seed(seed, name));
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double exponential_mean(Rng& rng, double mean) {
    return std::exponential_distribution<double>(1.0 / mean)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(rng);
}

}  // namespace reach

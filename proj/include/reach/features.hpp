#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "reach/engine.hpp"

namespace reach {

inline constexpr std::size_t kTaskFeatureDim = 14;
inline constexpr std::size_t kGpuFeatureDim = 16;
inline constexpr std::size_t kGlobalFeatureDim = 6;

using TaskFeatures = std::array<double, kTaskFeatureDim>;
using GpuFeatures = std::array<double, kGpuFeatureDim>;
using GlobalFeatures = std::array<double, kGlobalFeatureDim>;

struct Observation {
    TaskId task_id = 0;
    int k = 1;
    TaskFeatures task{};
    GlobalFeatures global{};
    std::vector<GpuId> gpu_ids;  // ascending, aligned with gpus
    std::vector<GpuFeatures> gpus;
};

TaskFeatures encode_task(const TaskSpec& task, SimTime now);
GpuFeatures encode_gpu(const GpuNode& gpu, const TaskSpec& task, const Engine& engine);
GlobalFeatures encode_global(const Engine& engine);

// Pure function of engine state; uses noise-free bandwidth so encoding never
// advances an RNG stream.
Observation encode_observation(const TaskRecord& task, const CandidateSet& cands, const Engine& engine);

// True when every feature is finite and inside its clamp range.
bool features_in_range(const Observation& obs);

std::uint64_t digest(const Observation& obs);

}  // namespace reach

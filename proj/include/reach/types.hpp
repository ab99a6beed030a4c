#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace reach {

using GpuId = std::uint32_t;
using TaskId = std::uint32_t;

// Simulation clock, seconds from epoch 0.
using SimTime = double;

inline constexpr double kSecondsPerHour = 3600.0;

// RTX 4090 Tensor32 throughput; task base_hours are defined on this GPU.
inline constexpr double kReferenceTflops = 82.6;
// Fastest model in the stock fleet (H100); used for expiry pre-checks.
inline constexpr double kBestTflops = 989.0;
// Bandwidth at which communication stops costing anything.
inline constexpr double kReferenceBandwidthGbps = 10.0;

enum class Region : std::uint8_t { UsEast, UsWest, EuWest, EuCentral, AsiaEast, AsiaSouth };
inline constexpr std::size_t kRegionCount = 6;

struct RegionInfo {
    Region id;
    std::string_view name;
    double latitude_deg;
    double longitude_deg;
    double intra_bandwidth_gbps;
    double egress_cost_per_gb;
};

// Default region catalog. Coordinates are major cloud/ISP hubs in each region.
const std::array<RegionInfo, kRegionCount>& default_regions();

std::string_view to_string(Region r);
Region parse_region(std::string_view name);
inline std::size_t index_of(Region r) { return static_cast<std::size_t>(r); }

enum class CommProfile : std::uint8_t { PointToPoint, ComputeHeavy, AllReduce, Ring };
inline constexpr std::size_t kCommProfileCount = 4;
std::string_view to_string(CommProfile p);
CommProfile parse_comm_profile(std::string_view name);

enum class TaskStatus : std::uint8_t {
    Pending,
    Staging,
    Running,
    CompletedOnTime,
    CompletedLate,
    Failed,
    Expired,
};
std::string_view to_string(TaskStatus s);
inline bool is_terminal(TaskStatus s) {
    return s == TaskStatus::CompletedOnTime || s == TaskStatus::CompletedLate ||
           s == TaskStatus::Failed || s == TaskStatus::Expired;
}
inline bool is_completed(TaskStatus s) {
    return s == TaskStatus::CompletedOnTime || s == TaskStatus::CompletedLate;
}

struct GpuModel {
    std::string name;
    double memory_gb;
    double tflops;
    double hourly_cost_usd;
    double base_dropout_per_hour;
    double fleet_weight;  // available quantity in the reference market
};

// Reference market: H100, RTX 4090, RTX 3080, RTX 3060.
std::vector<GpuModel> default_gpu_models();
// Model names compare with spaces ignored, so "RTX4090" names "RTX 4090".
bool model_name_matches(std::string_view a, std::string_view b);

struct GpuNode {
    GpuId id = 0;
    std::string model_name;
    double tflops = 0.0;
    double memory_gb = 0.0;
    Region region = Region::UsEast;
    double hourly_cost_usd = 0.0;
    double base_dropout_per_hour = 0.0;
    bool online = true;
    std::optional<TaskId> busy_task;
    std::optional<SimTime> last_offline_at;
    SimTime last_online_at = 0.0;

    bool idle() const { return online && !busy_task.has_value(); }
};

struct TaskSpec {
    TaskId id = 0;
    std::string template_name;
    int gpus_required = 1;
    double mem_per_gpu_gb = 0.0;
    double base_hours = 0.0;
    SimTime arrival = 0.0;
    SimTime deadline = 0.0;
    bool critical = false;
    CommProfile comm_profile = CommProfile::PointToPoint;
    double comm_intensity = 0.0;
    Region data_region = Region::UsEast;
    double data_volume_gb = 0.0;
};

struct TaskRecord {
    TaskSpec spec;
    TaskStatus status = TaskStatus::Pending;
    std::vector<GpuId> assigned_gpus;
    std::optional<SimTime> dispatched_at;
    std::optional<SimTime> started_at;
    std::optional<SimTime> finished_at;
    double p_comm = 1.0;
    double bandwidth_eff_gbps = 0.0;
    double latency_ms = 0.0;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace reach

#include "reach/types.hpp"

namespace reach {

const std::array<RegionInfo, kRegionCount>& default_regions() {
    static const std::array<RegionInfo, kRegionCount> regions{{
        {Region::UsEast, "US-East", 38.95, -77.45, 10.0, 0.05},
        {Region::UsWest, "US-West", 37.37, -121.92, 10.0, 0.05},
        {Region::EuWest, "EU-West", 53.35, -6.26, 10.0, 0.06},
        {Region::EuCentral, "EU-Central", 50.11, 8.68, 10.0, 0.06},
        {Region::AsiaEast, "Asia-East", 35.68, 139.69, 10.0, 0.08},
        {Region::AsiaSouth, "Asia-South", 19.08, 72.88, 10.0, 0.09},
    }};
    return regions;
}

std::string_view to_string(Region r) { return default_regions()[index_of(r)].name; }

Region parse_region(std::string_view name) {
    for (const auto& info : default_regions()) {
        if (info.name == name) return info.id;
    }
    throw ConfigError("unknown region '" + std::string(name) + "'");
}

std::string_view to_string(CommProfile p) {
    switch (p) {
        case CommProfile::PointToPoint: return "PointToPoint";
        case CommProfile::ComputeHeavy: return "ComputeHeavy";
        case CommProfile::AllReduce: return "AllReduce";
        case CommProfile::Ring: return "Ring";
    }
    return "?";
}

CommProfile parse_comm_profile(std::string_view name) {
    for (auto p : {CommProfile::PointToPoint, CommProfile::ComputeHeavy, CommProfile::AllReduce,
                   CommProfile::Ring}) {
        if (to_string(p) == name) return p;
    }
    throw ConfigError("unknown comm profile '" + std::string(name) + "'");
}

std::string_view to_string(TaskStatus s) {
    switch (s) {
        case TaskStatus::Pending: return "Pending";
        case TaskStatus::Staging: return "Staging";
        case TaskStatus::Running: return "Running";
        case TaskStatus::CompletedOnTime: return "CompletedOnTime";
        case TaskStatus::CompletedLate: return "CompletedLate";
        case TaskStatus::Failed: return "Failed";
        case TaskStatus::Expired: return "Expired";
    }
    return "?";
}

std::vector<GpuModel> default_gpu_models() {
    // Dropout rates are per online hour; community consumer cards churn more.
    return {
        {"H100", 80.0, 989.0, 2.26, 0.005, 45.0},
        {"RTX 4090", 24.0, 82.6, 0.40, 0.01, 2064.0},
        {"RTX 3080", 12.0, 29.8, 0.09, 0.02, 128.0},
        {"RTX 3060", 12.0, 12.4, 0.06, 0.03, 654.0},
    };
}

bool model_name_matches(std::string_view a, std::string_view b) {
    auto next = [](std::string_view s, std::size_t& i) {
        while (i < s.size() && s[i] == ' ') ++i;
        return i < s.size() ? s[i++] : '\0';
    };
    std::size_t i = 0, j = 0;
    while (true) {
        const char x = next(a, i);
        const char y = next(b, j);
        if (x != y) return false;
        if (x == '\0') return true;
    }
}

}  // namespace reach

#pragma once

#include <string>
#include <vector>

#include "reach/config.hpp"
#include "reach/engine.hpp"
#include "reach/types.hpp"

namespace testing {

inline reach::GpuNode make_gpu(reach::GpuId id, const std::string& model, reach::Region region) {
    for (const auto& m : reach::default_gpu_models()) {
        if (m.name == model) {
            reach::GpuNode g;
            g.id = id;
            g.model_name = m.name;
            g.tflops = m.tflops;
            g.memory_gb = m.memory_gb;
            g.region = region;
            g.hourly_cost_usd = m.hourly_cost_usd;
            g.base_dropout_per_hour = m.base_dropout_per_hour;
            return g;
        }
    }
    throw std::runtime_error("no model " + model);
}

inline std::vector<reach::GpuNode> make_fleet(int n, const std::string& model, reach::Region region) {
    std::vector<reach::GpuNode> out;
    for (int i = 0; i < n; ++i) out.push_back(make_gpu(static_cast<reach::GpuId>(i), model, region));
    return out;
}

// No churn, no congestion, no noise, agent slot left empty so tests dispatch by hand.
inline reach::ScenarioConfig quiet_config(std::vector<reach::GpuNode> fleet = {}) {
    reach::ScenarioConfig c;
    c.fleet.explicit_gpus = std::move(fleet);
    c.fleet.dropout_per_hour = 0.0;
    c.network.noise = 0.0;
    c.network.congestion_multiplier = 0.0;
    c.scheduler.name = "agent";
    c.workload.horizon_hours = 24.0;
    c.sim.drain_hours = 24.0;
    return c;
}

inline reach::TaskSpec make_task(double arrival, double base_hours, int k = 1, double mem = 0.0) {
    reach::TaskSpec t;
    t.template_name = "Probe";
    t.arrival = arrival;
    t.base_hours = base_hours;
    t.deadline = arrival + 100.0 * reach::kSecondsPerHour;
    t.gpus_required = k;
    t.mem_per_gpu_gb = mem;
    t.comm_profile = reach::CommProfile::PointToPoint;
    t.comm_intensity = 0.0;
    t.data_region = reach::Region::UsEast;
    t.data_volume_gb = 0.0;
    return t;
}

}  // namespace testing

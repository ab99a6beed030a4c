#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "reach/config.hpp"
#include "reach/engine.hpp"
#include "reach/features.hpp"
#include "reach/protocol.hpp"
#include "reach/runner.hpp"
#include "reach/workload.hpp"

namespace py = pybind11;
using namespace reach;

namespace {

py::object json_to_py(const nlohmann::ordered_json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::ordered_json py_to_json(const py::object& o) {
    return nlohmann::ordered_json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict outcome_dict(const TaskOutcome& o) {
    py::dict d;
    d["task_id"] = o.task_id;
    d["status"] = std::string(to_string(o.status));
    d["critical"] = o.critical;
    d["arrival"] = o.arrival;
    d["finished_at"] = o.finished_at;
    d["gpus"] = o.gpus;
    d["total_cost_usd"] = o.total_cost_usd;
    d["c_norm"] = o.c_norm;
    d["p_comm"] = o.p_comm;
    d["reward"] = o.reward();
    d["bandwidth_penalty"] = o.bandwidth_penalty ? py::cast(*o.bandwidth_penalty) : py::none();
    return d;
}

py::dict components_dict(const RewardComponents& c) {
    py::dict d;
    d["comp"] = c.comp;
    d["deadline"] = c.deadline;
    d["fail"] = c.fail;
    d["cost"] = c.cost;
    d["comm"] = c.comm;
    d["total"] = c.total();
    return d;
}

py::dict task_dict(const TaskSpec& t) {
    py::dict d;
    d["id"] = t.id;
    d["template"] = t.template_name;
    d["gpus_required"] = t.gpus_required;
    d["mem_per_gpu_gb"] = t.mem_per_gpu_gb;
    d["base_hours"] = t.base_hours;
    d["arrival"] = t.arrival;
    d["deadline"] = t.deadline;
    d["critical"] = t.critical;
    d["comm_profile"] = std::string(to_string(t.comm_profile));
    d["comm_intensity"] = t.comm_intensity;
    d["data_region"] = std::string(to_string(t.data_region));
    d["data_volume_gb"] = t.data_volume_gb;
    return d;
}

ScenarioConfig build_config(const std::string& preset, const std::map<std::string, std::string>& overrides) {
    ScenarioConfig c = make_preset(preset);
    for (const auto& [k, v] : overrides) c.set(k, v);
    c.validate();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Discrete-event simulator of a community GPU network";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DispatchRejected>(m, "DispatchRejected", PyExc_ValueError);
    py::register_exception<protocol::ProtocolError>(m, "ProtocolError", PyExc_ValueError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);

    m.attr("TRACE_HEADER") = std::string(kTraceHeader);
    m.attr("FEATURE_DIMS") = py::make_tuple(kTaskFeatureDim, kGpuFeatureDim, kGlobalFeatureDim);

    m.def("presets", &preset_names);

    py::class_<ScenarioConfig>(m, "Scenario")
        .def(py::init(&build_config), py::arg("preset") = "small",
             py::arg("overrides") = std::map<std::string, std::string>{})
        .def("set", [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.set(k, v); })
        .def("validate", &ScenarioConfig::validate)
        .def_property_readonly("preset", [](const ScenarioConfig& c) { return c.preset; })
        .def_property_readonly("horizon_hours", &ScenarioConfig::horizon_hours)
        .def_property_readonly("n_tasks", [](const ScenarioConfig& c) { return c.workload.n_tasks; })
        .def_property_readonly("n_gpus", [](const ScenarioConfig& c) { return c.fleet.n_gpus; })
        .def_property_readonly("scheduler", [](const ScenarioConfig& c) { return c.scheduler.name; })
        .def_property_readonly("seed", [](const ScenarioConfig& c) { return c.sim.seed; });

    m.def(
        "run",
        [](const ScenarioConfig& config, std::optional<std::uint64_t> seed, bool trace) {
            RunResult r;
            {
                py::gil_scoped_release release;
                r = run_scenario(config, seed.value_or(config.sim.seed), trace);
            }
            py::dict d;
            d["metrics"] = json_to_py(to_json(r.metrics));
            d["metrics_json"] = r.metrics_json;
            d["trace_csv"] = r.trace_csv;
            d["events"] = r.events;
            return d;
        },
        py::arg("config"), py::arg("seed") = py::none(), py::arg("trace") = false,
        "Run one simulation with the configured baseline scheduler.");

    m.def(
        "generate_workload",
        [](const ScenarioConfig& c, std::uint64_t seed) {
            py::list out;
            const auto phases = c.network.phases.empty() ? default_phases() : c.network.phases;
            for (const auto& t : generate(c.workload, c.templates, phases, seed)) out.append(task_dict(t));
            return out;
        },
        py::arg("config"), py::arg("seed"));

    m.def(
        "reward",
        [](const std::string& status, double c_norm, double p_comm, const std::map<std::string, double>& weights) {
            RewardWeights w;
            for (const auto& [k, v] : weights) {
                if (k == "w_comp") w.w_comp = v;
                else if (k == "w_deadline") w.w_deadline = v;
                else if (k == "w_fail") w.w_fail = v;
                else if (k == "w_cost") w.w_cost = v;
                else if (k == "w_comm") w.w_comm = v;
                else throw ConfigError("unknown reward weight '" + k + "'");
            }
            TaskStatus s;
            if (status == "CompletedOnTime") s = TaskStatus::CompletedOnTime;
            else if (status == "CompletedLate") s = TaskStatus::CompletedLate;
            else if (status == "Failed") s = TaskStatus::Failed;
            else if (status == "Expired") s = TaskStatus::Expired;
            else throw ConfigError("not a terminal status: '" + status + "'");
            return components_dict(reward_components(s, c_norm, p_comm, w));
        },
        py::arg("status"), py::arg("c_norm"), py::arg("p_comm"),
        py::arg("weights") = std::map<std::string, double>{});

    m.def(
        "protocol_roundtrip", [](const py::object& message) {
            const protocol::Message msg = protocol::from_json(py_to_json(message));
            return py::make_tuple(protocol::encode(msg), json_to_py(protocol::to_json(protocol::decode(protocol::encode(msg)))));
        },
        py::arg("message"), "Parse a protocol message, re-encode it and return (line, decoded dict).");

    py::class_<Engine>(m, "Engine")
        .def(py::init([](const ScenarioConfig& c, std::optional<std::uint64_t> seed) {
                 return std::make_unique<Engine>(c, seed.value_or(c.sim.seed));
             }),
             py::arg("config"), py::arg("seed") = py::none())
        .def("run_until",
             [](Engine& e, double t) {
                 py::list out;
                 for (const auto& o : e.run_until(t)) out.append(outcome_dict(o));
                 return out;
             })
        .def("run",
             [](Engine& e) {
                 py::list out;
                 for (const auto& o : e.run()) out.append(outcome_dict(o));
                 return out;
             })
        .def("pending",
             [](const Engine& e) {
                 std::vector<TaskId> ids;
                 for (const auto& k : e.pending()) ids.push_back(k.id);
                 return ids;
             })
        .def("task", [](const Engine& e, TaskId id) { return task_dict(e.task(id).spec); })
        .def("candidates", [](const Engine& e, TaskId id) { return e.candidates(id).gpus; })
        .def("observe",
             [](const Engine& e, TaskId id) {
                 const Observation obs = encode_observation(e.task(id), e.candidates(id), e);
                 py::dict d;
                 d["task_id"] = obs.task_id;
                 d["k"] = obs.k;
                 d["task_features"] = std::vector<double>(obs.task.begin(), obs.task.end());
                 d["global_features"] = std::vector<double>(obs.global.begin(), obs.global.end());
                 d["gpu_ids"] = obs.gpu_ids;
                 std::vector<std::vector<double>> gpus;
                 for (const auto& g : obs.gpus) gpus.emplace_back(g.begin(), g.end());
                 d["gpu_features"] = gpus;
                 return d;
             })
        .def("dispatch",
             [](Engine& e, TaskId id, const std::vector<GpuId>& gpus) {
                 const DispatchReceipt r = e.dispatch(id, gpus);
                 py::dict d;
                 d["task_id"] = r.task_id;
                 d["staging_s"] = r.staging_s;
                 d["compute_s"] = r.compute_s;
                 d["predicted_finish"] = r.predicted_finish;
                 d["p_comm"] = r.p_comm;
                 d["cost_estimate_usd"] = r.cost_estimate_usd;
                 return d;
             })
        .def("metrics", [](const Engine& e) { return json_to_py(to_json(e.metrics())); })
        .def("check_invariants", &Engine::check_invariants)
        .def_property_readonly("now", &Engine::now)
        .def_property_readonly("horizon", &Engine::horizon)
        .def_property_readonly("finished", &Engine::finished)
        .def_property_readonly("n_gpus", [](const Engine& e) { return e.gpus().size(); })
        .def_property_readonly("n_tasks", [](const Engine& e) { return e.tasks().size(); });
}

#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include <unistd.h>

#include "helpers.hpp"
#include "reach/runner.hpp"

using namespace reach;
namespace fs = std::filesystem;

namespace {

ScenarioConfig quick_small(int n_tasks = 100) {
    ScenarioConfig c = make_preset("small");
    c.workload.n_tasks = n_tasks;
    return c;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("reach_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

}  // namespace

TEST_SUITE("runner") {
    TEST_CASE("numbers print in shortest round-trip form") {
        CHECK(format_number(0.1) == "0.1");
        CHECK(format_number(120.0) == "120");
        CHECK(format_number(-0.25) == "-0.25");
        CHECK(format_number(1e-7) == "1e-07");
        const double third = 1.0 / 3.0;
        CHECK(std::stod(format_number(third)) == third);
    }

    TEST_CASE("trace rows fill empty cells for missing values") {
        TraceRow r{12.5, "dispatch", 3, {4, 9}, "Running", std::nullopt, std::nullopt, 1.25, 0.0};
        CHECK(format_trace_row(r) == "12.5,dispatch,3,4;9,Running,,,1.25,0");
        TraceRow g{7.0, "gpu_failure", std::nullopt, {2}, "offline", {}, {}, {}, {}};
        CHECK(format_trace_row(g) == "7,gpu_failure,,2,offline,,,,");
        CHECK(kTraceHeader == "time_s,event,task_id,gpu_ids,status,reward,cost_usd,p_comm,bandwidth_penalty");
    }

    TEST_CASE("a run is reproducible byte for byte") {
        const auto cfg = quick_small();
        const auto a = run_scenario(cfg, 1, true);
        const auto b = run_scenario(cfg, 1, true);
        CHECK(a.metrics_json == b.metrics_json);
        CHECK(a.trace_csv == b.trace_csv);
        const auto c = run_scenario(cfg, 2, true);
        CHECK(a.trace_csv != c.trace_csv);
        CHECK(a.metrics.counts.arrived == 100);
    }

    TEST_CASE("trace has one terminal row per task and a consistent shape") {
        const auto r = run_scenario(quick_small(), 4, true);
        const CsvTable t = parse_csv(r.trace_csv);
        REQUIRE(t.header.size() == 9);
        std::map<std::string, int> terminal;
        std::set<std::string> arrivals;
        double prev_time = 0.0;
        for (const auto& row : t.rows) {
            const double time = std::stod(row[0]);
            CHECK(time >= prev_time);
            prev_time = time;
            const std::string& ev = row[1];
            if (ev == "arrival") arrivals.insert(row[2]);
            if (ev == "complete" || ev == "fail" || ev == "expire") {
                ++terminal[row[2]];
                CHECK_FALSE(row[6].empty());
                CHECK(row[5].empty() == (ev == "expire"));
            }
        }
        CHECK(arrivals.size() == 100);
        CHECK(terminal.size() == 100);
        for (auto [id, n] : terminal) CHECK(n == 1);
        CHECK(t.rows.back()[1] == "horizon_end");
    }

    TEST_CASE("metrics document carries the stable keys") {
        const auto r = run_scenario(quick_small(), 1, false);
        CHECK(r.trace_csv.empty());
        const auto j = nlohmann::json::parse(r.metrics_json);
        for (const char* k : {"completion_rate", "deadline_satisfaction", "goodput_per_hour", "mean_slowdown",
                              "p95_slowdown", "per_class", "bandwidth_penalty_hist", "cost_total_usd", "counts"}) {
            INFO(k);
            CHECK(j.contains(k));
        }
        CHECK(j["counts"]["arrived"] == 100);
        CHECK(r.metrics_json.back() == '\n');
    }

    TEST_CASE("the agent scheduler needs a transport") {
        auto cfg = quick_small();
        cfg.scheduler.name = "agent";
        CHECK_THROWS_WITH_AS(run_scenario(cfg, 1, false), "agent transport unavailable", ConfigError);
    }

    TEST_CASE("sweeps walk the cartesian product in order") {
        SweepSpec spec;
        spec.base = quick_small(60);
        spec.knob = SweepKnob{"workload.n_tasks", {"20", "40", "60", "80", "100"}};
        spec.seeds = {1, 2, 3};
        spec.jobs = 4;
        const auto rows = run_sweep(spec);
        REQUIRE(rows.size() == 45);
        CHECK(rows[0].scheduler == "greedy");
        CHECK(rows[0].value == "20");
        CHECK(rows[0].seed == 1);
        CHECK(rows[1].seed == 2);
        CHECK(rows[3].value == "40");
        CHECK(rows[15].scheduler == "random");
        CHECK(rows[44].scheduler == "roundrobin");
        CHECK(rows[44].value == "100");
        CHECK(rows[44].seed == 3);
        for (const auto& r : rows) CHECK(r.metrics["counts"]["arrived"] == std::stoi(r.value));

        spec.jobs = 1;
        CHECK(sweep_csv(run_sweep(spec)) == sweep_csv(rows));

        const CsvTable csv = parse_csv(sweep_csv(rows));
        CHECK(csv.rows.size() == 45);
        CHECK(csv.header[0] == "scheduler");
        CHECK(csv.header[3] == "seed");
        for (const auto& h : csv.header) CHECK(h.find("latency_samples_ms") == std::string::npos);
    }

    TEST_CASE("preset knobs drive the stress sweeps") {
        SweepSpec spec;
        spec.base = make_preset("stress-dropout");
        spec.base.workload.n_tasks = 40;
        spec.knob = preset_knob("stress-dropout");
        spec.schedulers = {"greedy"};
        spec.jobs = 2;
        const auto rows = run_sweep(spec);
        REQUIRE(rows.size() == 5);
        CHECK(rows[4].knob == "churn.dropout_multiplier");
        CHECK(rows[4].value == "16");

        spec.base = make_preset("workload");
        spec.base.workload.n_tasks = 40;
        spec.knob = preset_knob("workload");
        const auto wrows = run_sweep(spec);
        REQUIRE(wrows.size() == 5);
        CHECK(wrows[3].value == "bursty");
    }

    TEST_CASE("a bad combination aborts the sweep and names it") {
        SweepSpec spec;
        spec.base = quick_small(20);
        spec.knob = SweepKnob{"workload.n_tasks", {"10", "zero"}};
        CHECK_THROWS_AS(run_sweep(spec), ConfigError);
        spec.knob.reset();
        spec.schedulers = {"greedy", "agent"};
        try {
            run_sweep(spec);
            FAIL("sweep accepted the agent scheduler");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("scheduler=agent") != std::string::npos);
            CHECK(msg.find("agent transport unavailable") != std::string::npos);
        }
    }

    TEST_CASE("summaries give mean and sample deviation over seeds") {
        CsvTable a = parse_csv("scheduler,knob,value,seed,x,y\ngreedy,k,1,1,1.0,\ngreedy,k,1,2,3.0,\n");
        CsvTable b = parse_csv("scheduler,knob,value,seed,x,y\ngreedy,k,1,3,5.0,7\nrandom,k,1,1,2,\n");
        const CsvTable s = summarize_sweeps({a, b});
        CHECK(s.header == std::vector<std::string>{"scheduler", "knob", "value", "n_seeds", "x_mean", "x_std", "y_mean", "y_std"});
        REQUIRE(s.rows.size() == 2);
        CHECK(s.rows[0][3] == "3");
        CHECK(s.rows[0][4] == "3");
        CHECK(s.rows[0][5] == "2");
        CHECK(s.rows[0][6] == "7");
        CHECK(s.rows[0][7].empty());
        CHECK(s.rows[1][0] == "random");
        CHECK_THROWS_AS(summarize_sweeps({parse_csv("a,b\n1,2\n")}), ConfigError);
        CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), ConfigError);
        CHECK(to_csv(a) == "scheduler,knob,value,seed,x,y\ngreedy,k,1,1,1.0,\ngreedy,k,1,2,3.0,\n");
    }

    TEST_CASE("empirical cdf collapses ties") {
        const CsvTable t = empirical_cdf({3.0, 1.0, 2.0, 2.0}, "latency_ms");
        CHECK(t.header[0] == "latency_ms");
        REQUIRE(t.rows.size() == 3);
        CHECK(t.rows[0] == std::vector<std::string>{"1", "0.25"});
        CHECK(t.rows[1] == std::vector<std::string>{"2", "0.75"});
        CHECK(t.rows[2] == std::vector<std::string>{"3", "1"});
    }

    TEST_CASE("outputs are written atomically") {
        TempDir dir;
        const auto r = run_scenario(quick_small(30), 1, true);
        write_run_outputs(dir.path / "run", r);
        CHECK(read_file(dir.path / "run" / "metrics.json") == r.metrics_json);
        CHECK(read_file(dir.path / "run" / "trace.csv") == r.trace_csv);
        write_atomic(dir.path / "note.txt", "hello");
        CHECK(read_file(dir.path / "note.txt") == "hello");
        for (const auto& e : fs::recursive_directory_iterator(dir.path)) {
            CHECK(e.path().extension() != ".tmp");
        }
        CHECK_THROWS_AS(read_file(dir.path / "missing.csv"), ConfigError);
    }

    TEST_CASE("flattening names nested metrics with dots") {
        nlohmann::ordered_json j;
        j["a"] = 1.5;
        j["b"] = {{"c", nullptr}, {"d", {1, 2}}};
        j["latency_samples_ms"] = {1.0};
        const auto flat = flatten_metrics(j);
        REQUIRE(flat.size() == 4);
        CHECK(flat[0] == std::pair<std::string, std::string>{"a", "1.5"});
        CHECK(flat[1] == std::pair<std::string, std::string>{"b.c", ""});
        CHECK(flat[2] == std::pair<std::string, std::string>{"b.d.0", "1"});
        CHECK(flat[3].first == "b.d.1");
    }
}

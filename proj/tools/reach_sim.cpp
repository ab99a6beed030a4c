// reach-sim: run, sweep, serve and report for the community GPU simulator.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reach/config.hpp"
#include "reach/protocol.hpp"
#include "reach/runner.hpp"
#include "reach/session.hpp"
#include "reach/transport.hpp"

namespace fs = std::filesystem;
using namespace reach;

namespace {

struct ScenarioArgs {
    std::string preset = "small";
    std::string config_file;
    std::vector<std::string> overrides;
    std::string scheduler;
    int tasks = 0;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* app) {
        app->add_option("--preset", preset, "scenario preset")->check(CLI::IsMember(preset_names()));
        app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
        app->add_option("--set", overrides, "override one key, e.g. --set churn.dropout_multiplier=4");
        app->add_option("--scheduler", scheduler, "greedy | random | roundrobin | agent");
        app->add_option("--tasks", tasks, "workload.n_tasks override");
        app->add_option("--seed", seed, "run seed (beats REACH_SEED and sim.seed)");
    }

    ScenarioConfig build() const {
        ScenarioConfig c = make_preset(preset);
        if (!config_file.empty()) c.apply_file(config_file);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            c.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!scheduler.empty()) c.set("scheduler.name", scheduler);
        if (tasks > 0) c.workload.n_tasks = tasks;
        if (seed) {
            c.sim.seed = *seed;
        } else if (const char* env = std::getenv("REACH_SEED"); env && *env) {
            c.set("sim.seed", env);
        }
        c.validate();
        return c;
    }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            seeds.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ConfigError("bad seed '" + item + "'");
        }
    }
    if (seeds.empty()) throw ConfigError("no seeds given");
    return seeds;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_run(const ScenarioArgs& args, const std::string& out_dir, const std::string& listen) {
    const ScenarioConfig config = args.build();
    if (config.scheduler.name == "agent") {
        if (listen.empty()) throw TransportError("agent transport unavailable");
        auto transport = listen_and_accept(listen);
        Session session(config, *transport, SessionOptions{"eval", config.sim.seed});
        std::string trace;
        session.set_episode_hook([&](std::uint64_t) { trace = std::string(kTraceHeader) + "\n"; });
        session.set_trace_hook([&](const TraceRow& row) { trace += format_trace_row(row) + "\n"; });
        const auto episodes = session.serve();
        if (episodes.empty()) throw TransportError("agent transport unavailable");
        RunResult r;
        r.metrics = episodes.back().metrics;
        r.metrics_json = to_json(r.metrics).dump(2) + "\n";
        r.trace_csv = trace;
        write_run_outputs(out_dir, r);
        return 0;
    }
    const RunResult r = run_scenario(config, config.sim.seed, true);
    write_run_outputs(out_dir, r);
    std::cerr << "ran " << r.metrics.counts.arrived << " tasks (" << r.events << " events) in " << r.wall_seconds
              << " s; metrics in " << (fs::path(out_dir) / "metrics.json").string() << "\n";
    return 0;
}

int cmd_sweep(const ScenarioArgs& args, const std::string& schedulers, const std::string& knob,
              const std::string& seeds, int jobs, const std::string& out) {
    SweepSpec spec;
    spec.base = args.build();
    spec.schedulers = split_list(schedulers);
    for (const auto& s : spec.schedulers) {
        if (s == "agent") throw TransportError("agent transport unavailable");
    }
    if (!knob.empty()) {
        const auto eq = knob.find('=');
        if (eq == std::string::npos) throw ConfigError("--knob expects key=v1,v2,...");
        spec.knob = SweepKnob{knob.substr(0, eq), split_list(knob.substr(eq + 1))};
    } else {
        spec.knob = preset_knob(args.preset);
    }
    spec.seeds = parse_seeds(seeds);
    spec.jobs = jobs;
    const auto rows = run_sweep(spec);
    write_atomic(out, sweep_csv(rows));
    std::cerr << rows.size() << " rows written to " << out << "\n";
    return 0;
}

int cmd_serve(const ScenarioArgs& args, const std::string& listen, const std::string& mode,
              const std::string& trace_file) {
    ScenarioConfig config = args.build();
    config.scheduler.name = "agent";
    std::cerr << "waiting for agent on " << listen << "\n";
    auto transport = listen_and_accept(listen);
    Session session(config, *transport, SessionOptions{mode, config.sim.seed});
    std::string trace;
    if (!trace_file.empty()) {
        session.set_trace_hook([&](const TraceRow& row) { trace += format_trace_row(row) + "\n"; });
    }
    const auto episodes = session.serve();
    if (!trace_file.empty()) write_atomic(trace_file, std::string(kTraceHeader) + "\n" + trace);
    std::cerr << "session ended after " << episodes.size() << " episode(s)\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
    std::vector<CsvTable> sweeps;
    CsvTable latency{{"source", "latency_ms", "cumulative_fraction"}, {}};
    CsvTable hist{{"source", "bin_lo", "bin_hi", "count"}, {}};
    for (const auto& in : inputs) {
        const fs::path p = fs::is_directory(in) ? fs::path(in) / "metrics.json" : fs::path(in);
        const std::string text = read_file(p);
        if (p.extension() == ".json") {
            const auto j = nlohmann::ordered_json::parse(text);
            std::vector<double> samples = j.at("latency_samples_ms").get<std::vector<double>>();
            for (auto& row : empirical_cdf(std::move(samples), "latency_ms").rows) {
                row.insert(row.begin(), p.string());
                latency.rows.push_back(std::move(row));
            }
            const auto& h = j.at("bandwidth_penalty_hist");
            const double w = h.at("bin_width").get<double>();
            const auto& counts = h.at("counts");
            for (std::size_t i = 0; i < counts.size(); ++i) {
                hist.rows.push_back({p.string(), format_number(w * static_cast<double>(i)),
                                     format_number(w * static_cast<double>(i + 1)), counts[i].dump()});
            }
        } else {
            sweeps.push_back(parse_csv(text));
        }
    }
    fs::create_directories(out_dir);
    if (!sweeps.empty()) write_atomic(fs::path(out_dir) / "summary.csv", to_csv(summarize_sweeps(sweeps)));
    if (!latency.rows.empty()) write_atomic(fs::path(out_dir) / "latency_cdf.csv", to_csv(latency));
    if (!hist.rows.empty()) write_atomic(fs::path(out_dir) / "bandwidth_penalty_hist.csv", to_csv(hist));
    std::cerr << "report written to " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-event simulator of a community GPU network"};
    app.require_subcommand(1);

    ScenarioArgs run_args, sweep_args, serve_args;
    std::string run_out = "out", run_listen;
    auto* run = app.add_subcommand("run", "run one simulation, write metrics.json and trace.csv");
    run_args.attach(run);
    run->add_option("--out", run_out, "output directory");
    run->add_option("--listen", run_listen, "agent address for --scheduler agent (stdio, unix:PATH, tcp:HOST:PORT)");

    std::string schedulers = "greedy,random,roundrobin", knob, seeds = "1,2,3", sweep_out = "sweep.csv";
    int jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "grid of runs over schedulers, a knob and seeds");
    sweep_args.attach(sweep);
    sweep->add_option("--schedulers", schedulers, "comma-separated scheduler names");
    sweep->add_option("--knob", knob, "key=v1,v2,... (defaults to the preset's grid)");
    sweep->add_option("--seeds", seeds, "comma-separated seeds");
    sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);
    sweep->add_option("--out", sweep_out, "CSV output path");

    std::string listen = "stdio", mode = "train", serve_trace;
    auto* serve = app.add_subcommand("serve", "serve the environment to an external agent");
    serve_args.attach(serve);
    serve->add_option("--listen", listen, "stdio, unix:PATH or tcp:HOST:PORT");
    serve->add_option("--mode", mode, "train | eval")->check(CLI::IsMember({"train", "eval"}));
    serve->add_option("--trace", serve_trace, "write a trace.csv covering every episode");

    std::vector<std::string> inputs;
    std::string report_out = "report";
    auto* report = app.add_subcommand("report", "aggregate sweep CSVs and metrics.json files into plot-ready CSVs");
    report->add_option("inputs", inputs, "sweep CSVs, metrics.json files or run directories")->required();
    report->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(run_args, run_out, run_listen);
        if (*sweep) return cmd_sweep(sweep_args, schedulers, knob, seeds, jobs, sweep_out);
        if (*serve) return cmd_serve(serve_args, listen, mode, serve_trace);
        if (*report) return cmd_report(inputs, report_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TransportError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const protocol::ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#include "reach/runner.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "reach/scheduling.hpp"

namespace reach {

namespace fs = std::filesystem;

std::string format_number(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
    return std::string(buf, ptr);
}

std::string format_trace_row(const TraceRow& row) {
    std::string out = format_number(row.time);
    auto cell = [&](const std::string& s) {
        out.push_back(',');
        out += s;
    };
    auto num = [&](const std::optional<double>& v) { cell(v ? format_number(*v) : std::string()); };
    cell(row.event);
    cell(row.task_id ? std::to_string(*row.task_id) : std::string());
    std::string ids;
    for (std::size_t i = 0; i < row.gpu_ids.size(); ++i) {
        if (i) ids.push_back(';');
        ids += std::to_string(row.gpu_ids[i]);
    }
    cell(ids);
    cell(row.status);
    num(row.reward);
    num(row.cost_usd);
    num(row.p_comm);
    num(row.bandwidth_penalty);
    return out;
}

RunResult run_scenario(const ScenarioConfig& config, std::uint64_t seed, bool with_trace) {
    if (!is_baseline(config.scheduler.name)) throw ConfigError("agent transport unavailable");
    const auto t0 = std::chrono::steady_clock::now();
    Engine engine(config, seed);
    RunResult result;
    if (with_trace) {
        result.trace_csv = std::string(kTraceHeader) + "\n";
        engine.set_trace_hook([&](const TraceRow& row) {
            result.trace_csv += format_trace_row(row);
            result.trace_csv.push_back('\n');
        });
    }
    engine.run();
    result.metrics = engine.metrics();
    result.metrics_json = to_json(result.metrics).dump(2) + "\n";
    result.events = engine.events_processed();
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

namespace {

fs::path temp_sibling(const fs::path& path) { return fs::path(path.string() + ".tmp"); }

void write_file(const fs::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

void write_atomic(const fs::path& path, std::string_view content) {
    const fs::path tmp = temp_sibling(path);
    write_file(tmp, content);
    fs::rename(tmp, path);
}

void write_run_outputs(const fs::path& dir, const RunResult& result) {
    fs::create_directories(dir);
    const fs::path metrics = dir / "metrics.json", trace = dir / "trace.csv";
    try {
        write_file(temp_sibling(metrics), result.metrics_json);
        write_file(temp_sibling(trace), result.trace_csv);
    } catch (...) {
        std::error_code ec;
        fs::remove(temp_sibling(metrics), ec);
        fs::remove(temp_sibling(trace), ec);
        throw;
    }
    fs::rename(temp_sibling(metrics), metrics);
    fs::rename(temp_sibling(trace), trace);
}

namespace {

std::string scalar_cell(const nlohmann::ordered_json& v) {
    if (v.is_null()) return {};
    if (v.is_number_float()) return format_number(v.get<double>());
    if (v.is_number()) return v.dump();
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void flatten_into(const nlohmann::ordered_json& v, const std::string& prefix,
                  std::vector<std::pair<std::string, std::string>>& out) {
    if (v.is_object()) {
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (prefix.empty() && it.key() == "latency_samples_ms") continue;
            flatten_into(*it, prefix.empty() ? it.key() : prefix + "." + it.key(), out);
        }
    } else if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) flatten_into(v[i], prefix + "." + std::to_string(i), out);
    } else {
        out.emplace_back(prefix, scalar_cell(v));
    }
}

}  // namespace

std::vector<std::pair<std::string, std::string>> flatten_metrics(const nlohmann::ordered_json& metrics) {
    std::vector<std::pair<std::string, std::string>> out;
    flatten_into(metrics, "", out);
    return out;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    struct Job {
        std::string scheduler;
        std::string value;
        std::uint64_t seed;
        ScenarioConfig config;
    };
    std::vector<Job> jobs;
    const std::vector<std::string> values = spec.knob ? spec.knob->values : std::vector<std::string>{""};
    for (const auto& s : spec.schedulers) {
        for (const auto& v : values) {
            for (std::uint64_t seed : spec.seeds) {
                ScenarioConfig c = spec.base;
                const std::string label = "scheduler=" + s + (spec.knob ? " " + spec.knob->key + "=" + v : "") +
                                          " seed=" + std::to_string(seed);
                try {
                    c.scheduler.name = s;
                    if (spec.knob) c.set(spec.knob->key, v);
                    c.validate();
                } catch (const ConfigError& e) {
                    throw ConfigError("sweep config " + label + ": " + e.what());
                }
                jobs.push_back(Job{s, v, seed, std::move(c)});
            }
        }
    }

    std::vector<SweepRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::optional<std::pair<std::size_t, std::string>> first_error;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            {
                std::lock_guard lock(err_mutex);
                if (first_error) return;
            }
            const Job& job = jobs[i];
            try {
                const RunResult r = run_scenario(job.config, job.seed, false);
                rows[i] = SweepRow{job.scheduler, spec.knob ? spec.knob->key : "", job.value, job.seed,
                                   to_json(r.metrics)};
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mutex);
                if (!first_error || i < first_error->first) first_error.emplace(i, e.what());
            }
        }
    };
    const int n_threads = std::max(1, std::min<int>(spec.jobs, static_cast<int>(jobs.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) {
        const Job& job = jobs[first_error->first];
        throw ConfigError("sweep run failed (scheduler=" + job.scheduler +
                          (spec.knob ? " " + spec.knob->key + "=" + job.value : "") +
                          " seed=" + std::to_string(job.seed) + "): " + first_error->second);
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "scheduler,knob,value,seed";
    if (rows.empty()) {
        out << "\n";
        return out.str();
    }
    const auto columns = flatten_metrics(rows.front().metrics);
    for (const auto& [key, _] : columns) out << ',' << key;
    out << "\n";
    for (const auto& row : rows) {
        out << row.scheduler << ',' << row.knob << ',' << row.value << ',' << row.seed;
        const auto cells = flatten_metrics(row.metrics);
        if (cells.size() != columns.size()) throw ContractViolation("sweep rows disagree on metric columns");
        for (const auto& [_, value] : cells) out << ',' << value;
        out << "\n";
    }
    return out.str();
}

CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    bool first = true;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t s = 0;
        while (true) {
            const auto c = line.find(',', s);
            cells.emplace_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
            if (c == std::string_view::npos) break;
            s = c + 1;
        }
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) throw ConfigError("CSV row has " + std::to_string(cells.size()) +
                                                                   " cells, header has " + std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out.push_back(',');
            out += cells[i];
        }
        out.push_back('\n');
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    return out;
}

CsvTable summarize_sweeps(const std::vector<CsvTable>& sweeps) {
    if (sweeps.empty()) throw ConfigError("no sweep tables to summarize");
    const auto& header = sweeps.front().header;
    if (header.size() < 4 || header[0] != "scheduler" || header[3] != "seed")
        throw ConfigError("not a sweep CSV (expected scheduler,knob,value,seed,...)");
    for (const auto& s : sweeps) {
        if (s.header != header) throw ConfigError("sweep CSVs have different columns");
    }

    using Key = std::tuple<std::string, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const std::vector<std::string>*>> groups;
    for (const auto& s : sweeps) {
        for (const auto& r : s.rows) {
            Key k{r[0], r[1], r[2]};
            auto [it, inserted] = groups.try_emplace(k);
            if (inserted) order.push_back(k);
            it->second.push_back(&r);
        }
    }

    CsvTable out;
    out.header = {"scheduler", "knob", "value", "n_seeds"};
    for (std::size_t c = 4; c < header.size(); ++c) {
        out.header.push_back(header[c] + "_mean");
        out.header.push_back(header[c] + "_std");
    }
    for (const auto& k : order) {
        const auto& rows = groups[k];
        std::vector<std::string> line{std::get<0>(k), std::get<1>(k), std::get<2>(k), std::to_string(rows.size())};
        for (std::size_t c = 4; c < header.size(); ++c) {
            std::vector<double> xs;
            for (const auto* r : rows) {
                const std::string& cell = (*r)[c];
                if (cell.empty()) continue;
                double v = 0.0;
                const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (ec == std::errc{} && p == cell.data() + cell.size()) xs.push_back(v);
            }
            if (xs.empty()) {
                line.emplace_back();
                line.emplace_back();
                continue;
            }
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean);
            line.push_back(format_number(mean));
            line.push_back(xs.size() > 1 ? format_number(std::sqrt(var / static_cast<double>(xs.size() - 1))) : "");
        }
        out.rows.push_back(std::move(line));
    }
    return out;
}

CsvTable empirical_cdf(std::vector<double> samples, std::string_view column) {
    std::sort(samples.begin(), samples.end());
    CsvTable t;
    t.header = {std::string(column), "cumulative_fraction"};
    const double n = static_cast<double>(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
        t.rows.push_back({format_number(samples[i]), format_number(static_cast<double>(i + 1) / n)});
    }
    return t;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace reach

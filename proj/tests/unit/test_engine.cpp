#include <doctest.h>

#include <map>
#include <set>

#include "helpers.hpp"
#include "reach/engine.hpp"

using namespace reach;

namespace {

void check_temporal(const Engine& e) {
    for (const auto& t : e.tasks()) {
        if (t.dispatched_at) {
            CHECK(*t.dispatched_at >= t.spec.arrival);
            if (t.started_at) CHECK(*t.started_at >= *t.dispatched_at);
        }
        if (t.finished_at) {
            CHECK(*t.finished_at >= t.spec.arrival);
            if (t.started_at) CHECK(*t.finished_at >= *t.started_at);
        }
    }
}

}  // namespace

TEST_SUITE("engine") {
    TEST_CASE("an empty stretch only advances the clock") {
        auto cfg = testing::quiet_config(testing::make_fleet(2, "RTX 4090", Region::UsEast));
        Engine e(cfg, 1, {});
        CHECK(e.run_until(3600.0).empty());
        CHECK(e.now() == 3600.0);
        CHECK_THROWS_AS(e.run_until(10.0), ContractViolation);
    }

    TEST_CASE("an arrival without a scheduler waits in the queue") {
        auto cfg = testing::quiet_config(testing::make_fleet(2, "RTX 4090", Region::UsEast));
        Engine e(cfg, 1, {testing::make_task(10.0, 1.0)});
        CHECK(e.run_until(5.0).empty());
        CHECK(e.pending().empty());
        CHECK(e.run_until(20.0).empty());
        CHECK(e.pending().size() == 1);
        CHECK(e.task(0).status == TaskStatus::Pending);
    }

    TEST_CASE("staging then compute completes on time at the predicted instant") {
        auto cfg = testing::quiet_config(testing::make_fleet(1, "RTX 4090", Region::UsEast));
        TaskSpec t = testing::make_task(0.0, 112.0 / 3600.0);
        t.data_volume_gb = 10.0;  // 80 Gb over the 10 Gbps in-region link = 8 s
        t.deadline = 130.0;
        Engine e(cfg, 1, {t});
        e.run_until(0.0);
        const GpuId g[] = {0};
        const auto receipt = e.dispatch(0, g);
        CHECK(receipt.staging_s == doctest::Approx(8.0));
        CHECK(receipt.compute_s == doctest::Approx(112.0));
        CHECK(receipt.predicted_finish == doctest::Approx(120.0));
        CHECK(e.task(0).status == TaskStatus::Staging);
        e.run_until(100.0);
        CHECK(e.task(0).status == TaskStatus::Running);
        CHECK(*e.task(0).started_at == doctest::Approx(8.0));
        const auto out = e.run_until(200.0);
        REQUIRE(out.size() == 1);
        CHECK(out[0].status == TaskStatus::CompletedOnTime);
        CHECK(out[0].finished_at == doctest::Approx(120.0));
        CHECK(e.gpus()[0].idle());
    }

    TEST_CASE("no data means the task starts running immediately") {
        auto cfg = testing::quiet_config(testing::make_fleet(1, "RTX 4090", Region::UsEast));
        Engine e(cfg, 1, {testing::make_task(0.0, 1.0)});
        e.run_until(0.0);
        const GpuId g[] = {0};
        const auto r = e.dispatch(0, g);
        CHECK(r.staging_s == 0.0);
        CHECK(e.task(0).status == TaskStatus::Running);
        CHECK(e.task(0).started_at == 0.0);
    }

    TEST_CASE("dispatch validation leaves state untouched") {
        auto fleet = testing::make_fleet(3, "RTX 3060", Region::UsEast);
        auto cfg = testing::quiet_config(fleet);
        std::vector<TaskSpec> tasks{testing::make_task(0.0, 1.0, 2), testing::make_task(0.0, 1.0, 1, 24.0)};
        Engine e(cfg, 1, tasks);
        e.run_until(0.0);
        e.force_failure(0);

        auto rejected = [&](TaskId id, std::vector<GpuId> gpus, const std::string& reason) {
            try {
                e.dispatch(id, gpus);
            } catch (const DispatchRejected& ex) {
                CHECK(ex.reason() == reason);
                return;
            }
            FAIL("dispatch was accepted");
        };
        rejected(0, {0, 1}, "gpu offline");
        rejected(0, {1}, "expected 2 GPUs, got 1");
        rejected(0, {1, 1}, "duplicate gpu");
        rejected(0, {1, 9}, "unknown gpu");
        rejected(1, {1}, "insufficient memory");
        rejected(7, {1}, "unknown task");
        CHECK(e.task(0).status == TaskStatus::Pending);
        CHECK(e.gpus()[1].idle());
        CHECK(e.gpus()[2].idle());
        CHECK(e.pending().size() == 2);
        e.check_invariants();

        const GpuId ok[] = {1, 2};
        e.dispatch(0, ok);
        rejected(0, {1, 2}, "task is not pending");
        e.run();
        rejected(1, {1}, "simulation finished");
    }

    TEST_CASE("without dropout no GPU ever fails") {
        auto cfg = make_preset("small");
        cfg.fleet.dropout_per_hour = 0.0;
        Engine e(cfg, 4);
        e.run();
        CHECK(e.churn_stats().failures == 0);
        // Only the horizon cut-off can fail a task here.
        for (const auto& o : e.outcomes()) {
            if (o.status == TaskStatus::Failed) CHECK(o.finished_at == e.horizon());
        }
    }

    TEST_CASE("failure rate scales with the dropout multiplier") {
        auto rate = [](double multiplier) {
            auto cfg = testing::quiet_config(testing::make_fleet(1000, "RTX 4090", Region::UsEast));
            cfg.fleet.dropout_per_hour = 0.01;
            cfg.churn.dropout_multiplier = multiplier;
            cfg.workload.horizon_hours = 168.0;
            cfg.sim.drain_hours = 0.0;
            Engine e(cfg, 11, {});
            e.run();
            const auto s = e.churn_stats();
            return static_cast<double>(s.failures) / s.online_gpu_hours;
        };
        const double r1 = rate(1.0), r16 = rate(16.0);
        // About 1680 failures at m = 1 (sd 2.4%) and far more at m = 16.
        CHECK(r1 == doctest::Approx(0.01).epsilon(0.1));
        CHECK(r16 == doctest::Approx(0.16).epsilon(0.1));
        CHECK(r16 / r1 == doctest::Approx(16.0).epsilon(0.1));
    }

    TEST_CASE("a failure during staging fails the task and frees its partners") {
        std::vector<GpuNode> fleet{testing::make_gpu(0, "RTX 4090", Region::UsEast),
                                   testing::make_gpu(1, "RTX 4090", Region::EuWest)};
        auto cfg = testing::quiet_config(fleet);
        TaskSpec t = testing::make_task(0.0, 1.0, 2);
        t.data_volume_gb = 100.0;
        Engine e(cfg, 1, {t});
        e.run_until(0.0);
        const GpuId both[] = {0, 1};
        CHECK(e.dispatch(0, both).staging_s == doctest::Approx(800.0 / 1.2));
        e.run_until(100.0);
        e.force_failure(1);
        CHECK(e.task(0).status == TaskStatus::Failed);
        CHECK(e.gpus()[0].idle());
        CHECK_FALSE(e.gpus()[1].online);
        CHECK_FALSE(e.gpus()[1].busy_task.has_value());
        e.check_invariants();
        REQUIRE(e.outcomes().size() == 1);
        CHECK(e.outcomes()[0].components->fail == -1.0);
        CHECK_THROWS_AS(e.force_failure(1), ContractViolation);
    }

    TEST_CASE("invariants, temporal order and conservation hold for every baseline") {
        for (const char* name : {"greedy", "random", "roundrobin"}) {
            INFO(name);
            auto cfg = make_preset("small");
            cfg.scheduler.name = name;
            cfg.churn.dropout_multiplier = 4.0;
            Engine e(cfg, 21);
            std::size_t collected = 0;
            for (SimTime t = 0.0; !e.finished(); t += 900.0) {
                collected += e.run_until(std::min(t, e.horizon())).size();
                e.check_invariants();
                check_temporal(e);
            }
            CHECK(collected == e.tasks().size());
            std::set<TaskId> seen;
            for (const auto& o : e.outcomes()) {
                CHECK(seen.insert(o.task_id).second);
                CHECK(is_terminal(o.status));
            }
            CHECK(seen.size() == e.tasks().size());
            const auto m = e.metrics();
            CHECK(m.counts.arrived == e.tasks().size());
        }
    }

    TEST_CASE("identical seeds give identical runs") {
        for (const char* name : {"greedy", "random", "roundrobin"}) {
            auto cfg = make_preset("small");
            cfg.scheduler.name = name;
            Engine a(cfg, 5), b(cfg, 5), c(cfg, 6);
            a.run();
            b.run();
            c.run();
            REQUIRE(a.outcomes().size() == b.outcomes().size());
            bool same = true;
            for (std::size_t i = 0; i < a.outcomes().size(); ++i) {
                const auto &x = a.outcomes()[i], &y = b.outcomes()[i];
                same = same && x.task_id == y.task_id && x.status == y.status && x.finished_at == y.finished_at &&
                       x.total_cost_usd == y.total_cost_usd && x.gpus == y.gpus;
            }
            CHECK(same);
            CHECK(a.events_processed() == b.events_processed());
            CHECK(a.events_processed() != c.events_processed());
        }
    }

    TEST_CASE("a free co-located on-time task earns the full reward") {
        auto g = testing::make_gpu(0, "RTX 4090", Region::UsEast);
        g.hourly_cost_usd = 0.0;
        auto cfg = testing::quiet_config({g});
        cfg.models[1].hourly_cost_usd = 0.0;
        Engine e(cfg, 1, {testing::make_task(0.0, 0.5)});
        e.run_until(0.0);
        const GpuId one[] = {0};
        e.dispatch(0, one);
        const auto out = e.run_until(3600.0);
        REQUIRE(out.size() == 1);
        CHECK(out[0].status == TaskStatus::CompletedOnTime);
        CHECK(out[0].reward() == 2.0);
        CHECK(out[0].p_comm == 1.0);
    }

    TEST_CASE("simultaneous completions are resolved in scheduling order") {
        auto cfg = testing::quiet_config(testing::make_fleet(2, "RTX 4090", Region::UsEast));
        Engine e(cfg, 1, {testing::make_task(0.0, 1.0), testing::make_task(0.0, 1.0)});
        e.run_until(0.0);
        const GpuId g0[] = {0}, g1[] = {1};
        e.dispatch(1, g0);
        e.dispatch(0, g1);
        const auto out = e.run_until(7200.0);
        REQUIRE(out.size() == 2);
        CHECK(out[0].finished_at == out[1].finished_at);
        CHECK(out[0].task_id == 1);
        CHECK(out[1].task_id == 0);
    }

    TEST_CASE("horizon end fails running work and expires the queue") {
        auto cfg = testing::quiet_config(testing::make_fleet(1, "RTX 4090", Region::UsEast));
        std::vector<TaskSpec> tasks{testing::make_task(0.0, 60.0), testing::make_task(10.0, 1.0, 2)};
        tasks[0].deadline = 200.0 * 3600.0;
        Engine e(cfg, 1, tasks);
        e.run_until(0.0);
        const GpuId g[] = {0};
        e.dispatch(0, g);
        const auto out = e.run();
        CHECK(e.finished());
        CHECK(e.now() == e.horizon());
        CHECK(e.horizon() == 48.0 * 3600.0);
        REQUIRE(out.size() == 2);
        CHECK(e.task(0).status == TaskStatus::Failed);
        CHECK(e.task(1).status == TaskStatus::Expired);
        CHECK_FALSE(out[1].components.has_value());
        CHECK(e.gpus()[0].idle());
    }

    TEST_CASE("trace rows narrate a task's life") {
        auto cfg = testing::quiet_config(testing::make_fleet(1, "RTX 4090", Region::UsEast));
        cfg.scheduler.name = "greedy";
        TaskSpec t = testing::make_task(5.0, 0.5);
        t.data_volume_gb = 1.0;
        Engine e(cfg, 1, {t});
        std::vector<std::string> events;
        e.set_trace_hook([&](const TraceRow& r) {
            if (r.task_id) events.push_back(r.event);
        });
        e.run();
        CHECK(events == std::vector<std::string>{"arrival", "dispatch", "start", "complete"});
    }

    TEST_CASE("fleets built from the config") {
        auto cfg = make_preset("small");
        cfg.fleet.region_mix = {0, 0, 1, 0, 0, 0};
        const auto fleet = build_fleet(cfg.fleet, cfg.models, 2);
        CHECK(fleet.size() == 64);
        for (const auto& g : fleet) CHECK(g.region == Region::EuWest);
        cfg.fleet.model_mix = {{"H100", 1.0}};
        for (const auto& g : build_fleet(cfg.fleet, cfg.models, 2)) CHECK(g.model_name == "H100");
        cfg.fleet.model_mix = {{"Voodoo2", 1.0}};
        CHECK_THROWS_AS(build_fleet(cfg.fleet, cfg.models, 2), ConfigError);
    }
}

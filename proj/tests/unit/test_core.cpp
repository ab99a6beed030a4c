#include <doctest.h>

#include <map>
#include <set>

#include "helpers.hpp"
#include "reach/config.hpp"
#include "reach/engine.hpp"
#include "reach/rng.hpp"

using namespace reach;

TEST_SUITE("core") {
    TEST_CASE("GPU catalog matches the reference market table") {
        const auto models = default_gpu_models();
        REQUIRE(models.size() == 4);
        struct Row {
            const char* name;
            double mem, tflops, price, qty;
        };
        const Row table[] = {
            {"H100", 80, 989.0, 2.26, 45},
            {"RTX 4090", 24, 82.6, 0.40, 2064},
            {"RTX 3080", 12, 29.8, 0.09, 128},
            {"RTX 3060", 12, 12.4, 0.06, 654},
        };
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(models[i].name == table[i].name);
            CHECK(models[i].memory_gb == table[i].mem);
            CHECK(models[i].tflops == table[i].tflops);
            CHECK(models[i].hourly_cost_usd == table[i].price);
            CHECK(models[i].fleet_weight == table[i].qty);
        }
        CHECK(kReferenceTflops == 82.6);
    }

    TEST_CASE("largest remainder apportionment of the market quantities") {
        const std::vector<double> qty{45, 2064, 128, 654};
        // Hand-computed: 64 * q / 2891 = 0.996, 45.69, 2.83, 14.48.
        CHECK(apportion(64, qty) == std::vector<int>{1, 46, 3, 14});
        // 1000 * q / 2891 = 15.57, 713.94, 44.28, 226.22.
        CHECK(apportion(1000, qty) == std::vector<int>{16, 714, 44, 226});
        CHECK(apportion(0, qty) == std::vector<int>{0, 0, 0, 0});
        CHECK_THROWS_AS(apportion(3, {0.0, 0.0}), ConfigError);
    }

    TEST_CASE("small and large presets build fleets with the apportioned mix") {
        for (auto [preset, expect] : {std::pair{"small", std::map<std::string, int>{{"H100", 1}, {"RTX 4090", 46}, {"RTX 3080", 3}, {"RTX 3060", 14}}},
                                      std::pair{"large", std::map<std::string, int>{{"H100", 16}, {"RTX 4090", 714}, {"RTX 3080", 44}, {"RTX 3060", 226}}}}) {
            const ScenarioConfig c = make_preset(preset);
            const auto fleet = build_fleet(c.fleet, c.models, 1);
            std::map<std::string, int> counts;
            for (const auto& g : fleet) ++counts[g.model_name];
            CHECK(counts == expect);
            for (std::size_t i = 0; i < fleet.size(); ++i) CHECK(fleet[i].id == i);
        }
        CHECK(make_preset("large").workload.n_tasks == 5000);
        CHECK(make_preset("small").fleet.n_gpus == 64);
    }

    TEST_CASE("fleet placement depends on the seed but not on other streams") {
        const ScenarioConfig c = make_preset("small");
        const auto a = build_fleet(c.fleet, c.models, 7);
        const auto b = build_fleet(c.fleet, c.models, 7);
        const auto d = build_fleet(c.fleet, c.models, 8);
        bool same = true, differs = false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            same = same && a[i].model_name == b[i].model_name && a[i].region == b[i].region;
            differs = differs || a[i].model_name != d[i].model_name || a[i].region != d[i].region;
        }
        CHECK(same);
        CHECK(differs);
    }

    TEST_CASE("named streams are independent and reproducible") {
        std::set<std::uint64_t> seeds;
        for (auto name : {stream::kChurn, stream::kWorkload, stream::kNetwork, stream::kScheduling,
                          stream::kAgentSampling, stream::kFleet}) {
            CHECK(derive_seed(42, name) == derive_seed(42, name));
            seeds.insert(derive_seed(42, name));
        }
        CHECK(seeds.size() == 6);
        CHECK(derive_seed(1, stream::kChurn) != derive_seed(2, stream::kChurn));
        Rng a = make_stream(3, stream::kWorkload), b = make_stream(3, stream::kWorkload);
        for (int i = 0; i < 100; ++i) CHECK(a() == b());
    }

    TEST_CASE("model names match with spaces ignored") {
        CHECK(model_name_matches("RTX 4090", "RTX4090"));
        CHECK(model_name_matches("H100", "H100"));
        CHECK_FALSE(model_name_matches("RTX 4090", "RTX 3090"));
        CHECK_FALSE(model_name_matches("RTX 40", "RTX 4090"));
    }

    TEST_CASE("config keys parse and reject garbage") {
        ScenarioConfig c = make_preset("small");
        c.apply_text("# comment\nworkload.n_tasks = 500\nchurn.dropout_multiplier=4\nfleet.model_mix = H100:1, RTX4090:3\n");
        CHECK(c.workload.n_tasks == 500);
        CHECK(c.churn.dropout_multiplier == 4.0);
        CHECK(c.fleet.model_mix.size() == 2);
        c.validate();
        CHECK_THROWS_AS(c.set("workload.n_task", "5"), ConfigError);
        CHECK_THROWS_AS(c.set("workload.n_tasks", "five"), ConfigError);
        CHECK_THROWS_AS(c.apply_text("no equals sign here"), ConfigError);
        c.set("scheduler.name", "fancy");
        CHECK_THROWS_AS(c.validate(), ConfigError);
        CHECK_THROWS_AS(make_preset("tiny"), ConfigError);
    }

    TEST_CASE("template and phase keys edit the libraries in place") {
        ScenarioConfig c = make_preset("small");
        c.set("template.BertFinetune.base_hours", "7.5");
        c.set("network.phase.Evening.bandwidth_multiplier", "0.5");
        c.set("model.RTX3060.hourly_cost_usd", "0.07");
        CHECK(find_template(c.templates, "BertFinetune").base_hours == 7.5);
        c.validate();
        bool found = false;
        for (const auto& p : c.network.phases) {
            if (p.name == "Evening") found = p.bandwidth_multiplier == 0.5;
        }
        CHECK(found);
        CHECK(c.models[3].hourly_cost_usd == 0.07);
        c.set("network.phase.Evening.bandwidth_multiplier", "1.5");
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }

    TEST_CASE("execution time follows the slowest GPU") {
        TaskSpec bert = testing::make_task(0, 6.0);
        const GpuNode r3060 = testing::make_gpu(0, "RTX 3060", Region::UsEast);
        const GpuNode r4090 = testing::make_gpu(1, "RTX 4090", Region::UsEast);
        const GpuNode h100 = testing::make_gpu(2, "H100", Region::UsEast);
        const GpuNode* one[] = {&r3060};
        CHECK(execution_hours(bert, one, 1.0) == doctest::Approx(6.0 * 82.6 / 12.4).epsilon(1e-12));
        CHECK(execution_hours(bert, one, 1.0) == doctest::Approx(39.97).epsilon(1e-3));
        const GpuNode* ref[] = {&r4090};
        for (double h : {0.1, 1.0, 6.0, 12.0}) {
            TaskSpec t = testing::make_task(0, h);
            CHECK(execution_hours(t, ref, 1.0) == h);
        }
        TaskSpec pair = testing::make_task(0, 6.0, 2);
        const GpuNode* mixed[] = {&h100, &r3060};
        CHECK(execution_hours(pair, mixed, 1.0) == execution_hours(bert, one, 1.0));
        CHECK(execution_hours(bert, one, 2.5) == doctest::Approx(2.5 * 6.0 * 82.6 / 12.4));
    }
}

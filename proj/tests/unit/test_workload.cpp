#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "reach/workload.hpp"

using namespace reach;

namespace {

WorkloadConfig config_for(PatternKind kind, int n, double hours = 24.0) {
    WorkloadConfig c;
    c.pattern.kind = kind;
    c.n_tasks = n;
    c.horizon_hours = hours;
    return c;
}

// Kolmogorov distribution tail: P(sqrt(N) D > x).
double kolmogorov_tail(double x) {
    double s = 0.0;
    for (int k = 1; k < 100; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
    return s;
}

}  // namespace

TEST_SUITE("workload") {
    TEST_CASE("uniform pattern fills every quarter of the day evenly") {
        const auto phases = default_phases();
        Rng rng = make_stream(1, stream::kWorkload);
        const auto arrivals = generate_arrivals(config_for(PatternKind::Uniform, 1000), phases, rng);
        REQUIRE(arrivals.size() == 1000);
        std::array<int, 4> buckets{};
        for (double t : arrivals) ++buckets[static_cast<std::size_t>(t / (6 * kSecondsPerHour))];
        // Binomial(1000, 1/4): sd = sqrt(1000 * 0.25 * 0.75) = 13.69.
        for (int b : buckets) CHECK(std::abs(b - 250.0) <= 3.0 * 13.693);
    }

    TEST_CASE("poisson inter-arrival gaps are exponential") {
        const auto phases = default_phases();
        Rng rng = make_stream(2, stream::kWorkload);
        const double hours = 240.0;
        const auto arrivals = generate_arrivals(config_for(PatternKind::Poisson, 5000, hours), phases, rng);
        std::vector<double> gaps;
        double prev = 0.0;
        for (double t : arrivals) {
            gaps.push_back(t - prev);
            prev = t;
        }
        std::sort(gaps.begin(), gaps.end());
        const double rate = 5000.0 / (hours * kSecondsPerHour);
        const double n = static_cast<double>(gaps.size());
        double d = 0.0;
        for (std::size_t i = 0; i < gaps.size(); ++i) {
            const double cdf = 1.0 - std::exp(-rate * gaps[i]);
            d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
        }
        // 1% critical value of the one-sample KS statistic.
        CHECK(kolmogorov_tail(1.628) == doctest::Approx(0.01).epsilon(0.02));
        CHECK(d < 1.628 / std::sqrt(n));
    }

    TEST_CASE("every pattern hits the requested volume on average") {
        const auto phases = default_phases();
        for (auto kind : {PatternKind::Phased, PatternKind::Uniform, PatternKind::Sinusoidal, PatternKind::Bursty,
                          PatternKind::Poisson}) {
            double total = 0.0;
            for (std::uint64_t seed = 1; seed <= 50; ++seed) {
                Rng rng = make_stream(seed, stream::kWorkload);
                total += static_cast<double>(generate_arrivals(config_for(kind, 1000, 72.0), phases, rng).size());
            }
            INFO("pattern " << to_string(kind));
            // Poisson count over 50 seeds: sd of the mean = sqrt(1000/50) = 4.5, well inside 2%.
            CHECK(std::abs(total / 50.0 - 1000.0) <= 20.0);
        }
    }

    TEST_CASE("arrivals are sorted, bounded and reproducible") {
        const auto phases = default_phases();
        for (auto kind : {PatternKind::Phased, PatternKind::Uniform, PatternKind::Sinusoidal, PatternKind::Bursty,
                          PatternKind::Poisson}) {
            Rng a = make_stream(5, stream::kWorkload), b = make_stream(5, stream::kWorkload);
            const auto x = generate_arrivals(config_for(kind, 300, 48.0), phases, a);
            const auto y = generate_arrivals(config_for(kind, 300, 48.0), phases, b);
            CHECK(x == y);
            CHECK(std::is_sorted(x.begin(), x.end()));
            for (double t : x) {
                CHECK(t >= 0.0);
                CHECK(t < 48.0 * kSecondsPerHour);
            }
        }
    }

    TEST_CASE("phased arrivals follow the phase weights") {
        const auto phases = default_phases();
        Rng rng = make_stream(6, stream::kWorkload);
        const auto arrivals = generate_arrivals(config_for(PatternKind::Phased, 40000, 24.0), phases, rng);
        std::array<int, 4> per_phase{};
        for (double t : arrivals) ++per_phase[static_cast<std::size_t>(t / (6 * kSecondsPerHour))];
        // Weights 0.6, 1.0, 1.4, 1.0 over equal windows.
        const std::array<double, 4> share{0.6 / 4.0, 1.0 / 4.0, 1.4 / 4.0, 1.0 / 4.0};
        for (std::size_t i = 0; i < 4; ++i) {
            const double sd = std::sqrt(40000 * share[i] * (1 - share[i]));
            CHECK(std::abs(per_phase[i] - 40000 * share[i]) <= 4 * sd);
        }
    }

    TEST_CASE("deadline slack arithmetic") {
        CHECK(deadline_for_slack(0.1, 0.0, 2.0) == doctest::Approx(0.2 * kSecondsPerHour));
        CHECK(deadline_for_slack(6.0, 100.0, 4.0) == doctest::Approx(100.0 + 24.0 * kSecondsPerHour));
        TaskTemplate t;
        t.base_hours = 6.0;
        Rng rng(3);
        for (int i = 0; i < 1000; ++i) {
            const SimTime d = assign_deadline(t, false, 0.0, rng);
            CHECK(d >= 12.0 * kSecondsPerHour);
            CHECK(d <= 24.0 * kSecondsPerHour);
            const SimTime c = assign_deadline(t, true, 0.0, rng);
            CHECK(c >= 9.0 * kSecondsPerHour);
            CHECK(c <= 15.0 * kSecondsPerHour);
        }
    }

    TEST_CASE("generated tasks are well formed") {
        WorkloadConfig c = config_for(PatternKind::Phased, 2000, 72.0);
        const auto tasks = generate(c, default_templates(), default_phases(), 9);
        REQUIRE(tasks.size() == 2000);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            const auto& t = tasks[i];
            CHECK(t.id == i);
            CHECK(t.deadline > t.arrival + t.base_hours * kSecondsPerHour);
            CHECK(t.gpus_required >= 1);
            if (i > 0) CHECK(tasks[i - 1].arrival <= t.arrival);
        }
        const auto again = generate(c, default_templates(), default_phases(), 9);
        CHECK(again.back().arrival == tasks.back().arrival);
        CHECK(again.back().template_name == tasks.back().template_name);
    }

    TEST_CASE("region weights steer data placement") {
        WorkloadConfig c = config_for(PatternKind::Poisson, 3000, 24.0);
        c.region_weights = {1, 0, 0, 0, 0, 3};
        std::map<Region, int> counts;
        for (const auto& t : generate(c, default_templates(), default_phases(), 4)) ++counts[t.data_region];
        CHECK(counts.size() == 2);
        int total = 0;
        for (auto [r, n] : counts) total += n;
        // Binomial(total, 0.75): sd about 23.7 at 3000.
        CHECK(std::abs(counts[Region::AsiaSouth] - 0.75 * total) <= 4 * std::sqrt(total * 0.75 * 0.25));
    }

    TEST_CASE("uniform pattern also flattens task properties") {
        WorkloadConfig c = config_for(PatternKind::Uniform, 8000, 24.0);
        c.region_weights = {1, 0, 0, 0, 0, 0};
        std::map<Region, int> regions;
        std::map<std::string, int> names;
        int critical = 0;
        for (const auto& t : generate(c, default_templates(), default_phases(), 4)) {
            ++regions[t.data_region];
            ++names[t.template_name];
            critical += t.critical;
        }
        CHECK(regions.size() == kRegionCount);
        CHECK(names.size() == 8);
        // Binomial(8000, 1/8): sd = 29.6.
        for (auto [n, k] : names) CHECK(std::abs(k - 1000) <= 4 * 29.6);
        CHECK(std::abs(critical - 4000) <= 4 * 44.8);
    }

    TEST_CASE("overnight mix is dominated by long jobs") {
        WorkloadConfig c = config_for(PatternKind::Phased, 20000, 24.0);
        const auto tasks = generate(c, default_templates(), default_phases(), 11);
        int night = 0, night_long = 0, peak = 0, peak_long = 0;
        for (const auto& t : tasks) {
            const bool long_job = t.base_hours >= 4.0;
            if (t.arrival < 6 * kSecondsPerHour) {
                ++night;
                night_long += long_job;
            } else if (t.arrival >= 12 * kSecondsPerHour && t.arrival < 18 * kSecondsPerHour) {
                ++peak;
                peak_long += long_job;
            }
        }
        REQUIRE(night > 0);
        REQUIRE(peak > 0);
        CHECK(static_cast<double>(night_long) / night > 0.5);
        CHECK(static_cast<double>(night_long) / night > static_cast<double>(peak_long) / peak);
    }

    TEST_CASE("default template library") {
        const auto tmpls = default_templates();
        CHECK(tmpls.size() == 8);
        const auto& inf = find_template(tmpls, "CriticalInference");
        CHECK(inf.base_hours == 0.1);
        CHECK(inf.critical_probability == 0.9);
        const auto& llama = find_template(tmpls, "Llama7bFinetune");
        CHECK(llama.gpus_required == 16);
        CHECK(llama.comm_profile == CommProfile::AllReduce);
        CHECK(find_template(tmpls, "ResNetTraining").gpus_required == 32);
        CHECK_THROWS_AS(find_template(tmpls, "Nope"), ConfigError);
        CHECK_THROWS_AS(generate(config_for(PatternKind::Uniform, 0), tmpls, default_phases(), 1), ConfigError);
        CHECK(parse_pattern("bursty") == PatternKind::Bursty);
        CHECK_THROWS_AS(parse_pattern("zigzag"), ConfigError);
    }
}

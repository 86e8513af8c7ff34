// Compares the serial reference path against the OpenMP path for the three
// data-parallel kernels (bootstrap replicates, per-cohort fits, simulation
// batches) and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "panelkit/diagnostics.hpp"
#include "panelkit/fixtures.hpp"
#include "panelkit/inference.hpp"
#include "panelkit/run.hpp"

using namespace panelkit;

namespace {

double run_ms(const std::function<void()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto end = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(end - start).count();
}

bool identical(const IntervalSeries& a, const IntervalSeries& b) {
    if (a.by_event_time.size() != b.by_event_time.size()) return false;
    for (const auto& [k, ci] : a.by_event_time) {
        auto it = b.by_event_time.find(k);
        if (it == b.by_event_time.end()) return false;
        if (ci.first != it->second.first || ci.second != it->second.second) return false;
    }
    return true;
}

bool identical(const AttResult& a, const AttResult& b) {
    if (a.by_event_time.size() != b.by_event_time.size()) return false;
    for (const auto& [k, cell] : a.by_event_time) {
        const AttCell& other = b.by_event_time.at(k);
        if (cell.estimate != other.estimate) return false;
        if (cell.ci_lower != other.ci_lower || cell.ci_upper != other.ci_upper) return false;
    }
    return true;
}

void report(const char* name, double serial_ms, double parallel_ms, bool match) {
    std::printf("%-24s serial %9.1f ms   openmp %9.1f ms   speedup %5.2fx   identical %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms, match ? "yes" : "NO");
}

} // namespace

int main() {
    std::printf("panelkit kernel benchmark (%d thread(s))\n\n", hardware_threads());

    auto [panel, schedule] = staggered_policy_fixture(7);
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 10, 4);

    // Per-cohort synthetic-control fits.
    {
        EstimationOptions options;
        options.bootstrap.replicates = 0;
        options.pooling_weight = 0.0;
        options.fit_mode = CohortFitMode::AverageOfUnits; // one fit per treated unit
        options.pooling_sensitivity = false;
        RunOutput serial_out, parallel_out;
        options.exec = ExecMode::Serial;
        const double t_serial = run_ms([&] { serial_out = run_estimation(frame, options); });
        options.exec = ExecMode::Parallel;
        const double t_parallel = run_ms([&] { parallel_out = run_estimation(frame, options); });
        report("unit scm fits", t_serial, t_parallel,
               identical(serial_out.run.att, parallel_out.run.att));
    }

    // Wild bootstrap replicates.
    {
        EstimationOptions options;
        options.bootstrap.replicates = 0;
        options.pooling_sensitivity = false;
        options.exec = ExecMode::Serial;
        RunOutput out = run_estimation(frame, options);
        std::vector<UnitContribution> contributions = unit_contributions(out.run);
        std::map<int, double> points;
        for (const auto& [k, cell] : out.run.att.by_event_time) points[k] = cell.estimate;

        BootstrapConfig config;
        config.replicates = 20000;
        config.seed = 99;
        IntervalSeries ci_serial, ci_parallel;
        const double t_serial = run_ms(
            [&] { ci_serial = wild_bootstrap_ci(contributions, points, config, ExecMode::Serial); });
        const double t_parallel = run_ms([&] {
            ci_parallel = wild_bootstrap_ci(contributions, points, config, ExecMode::Parallel);
        });
        report("bootstrap replicates", t_serial, t_parallel, identical(ci_serial, ci_parallel));
    }

    // Placebo-in-time sweep (whole-pipeline batches).
    {
        EstimationOptions options;
        options.bootstrap.replicates = 200;
        options.bootstrap.seed = 5;
        options.pooling_sensitivity = false;

        std::vector<double> serial_avgs, parallel_avgs;
        options.exec = ExecMode::Serial;
        const double t_serial = run_ms([&] {
            for (int shift = 1; shift <= 7; ++shift) {
                serial_avgs.push_back(
                    placebo_in_time(frame, shift, options).average_placebo_effect);
            }
        });
        options.exec = ExecMode::Parallel;
        const double t_parallel = run_ms([&] {
            for (int shift = 1; shift <= 7; ++shift) {
                parallel_avgs.push_back(
                    placebo_in_time(frame, shift, options).average_placebo_effect);
            }
        });
        report("placebo sweep", t_serial, t_parallel, serial_avgs == parallel_avgs);
    }

    return 0;
}

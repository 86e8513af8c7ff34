#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "panelkit/errors.hpp"
#include "panelkit/fixtures.hpp"
#include "panelkit/staggered.hpp"
#include "test_util.hpp"

using namespace panelkit;
using pktest::make_panel;
using pktest::make_schedule;

namespace {

// Two cohorts (years 7 and 9) over four never-treated donors, periods 1..12.
StudyFrame two_cohort_frame(double effect) {
    Rng rng(321);
    std::vector<std::string> units = {"T1", "T2", "T3", "D1", "D2", "D3", "D4"};
    std::vector<int> times;
    for (int t = 1; t <= 12; ++t) times.push_back(t);
    TreatmentSchedule schedule;
    schedule.set("T1", 7);
    schedule.set("T2", 7);
    schedule.set("T3", 9);
    for (const char* d : {"D1", "D2", "D3", "D4"}) schedule.set(d, std::nullopt);

    std::vector<double> outcomes;
    for (const auto& unit : units) {
        const double level = rng.uniform(10.0, 20.0);
        const double slope = rng.uniform(-0.4, 0.4);
        const auto adoption = schedule.at(unit);
        for (int t : times) {
            double y = level + slope * t + rng.normal(0.0, 0.3);
            if (adoption && t >= *adoption) y += effect;
            outcomes.push_back(y);
        }
    }
    Panel panel(units, times, std::move(outcomes));
    return apply_inclusion_filter(panel, schedule, 3, 4);
}

double pooled_pre_term(const StudyFrame& frame, const std::vector<CohortEstimate>& cohorts,
                       const std::vector<WeightVector>& weights, bool demean) {
    // Independent evaluation of the aligned-average pre-period fit.
    int aligned = 1 << 30;
    int total_members = 0;
    for (const auto& c : cohorts) {
        aligned = std::min(aligned, event_window(frame, c.members.front()).pre_periods);
        total_members += static_cast<int>(c.members.size());
    }
    double sum_sq = 0.0;
    for (int lag = 1; lag <= aligned; ++lag) {
        double cross = 0.0;
        for (std::size_t c = 0; c < cohorts.size(); ++c) {
            const auto& cohort = cohorts[c];
            const int year = cohort.cohort_year - lag;
            std::vector<int> member_idx;
            for (const auto& m : cohort.members) member_idx.push_back(frame.panel.unit_index(m));
            double target = detail::member_mean(frame.panel, member_idx, year);
            double synth = 0.0;
            const auto donors = donor_set(frame, cohort.members.front());
            for (const auto& d : donors) {
                synth += weights[c].at(d) * frame.panel.value_in_year(frame.panel.unit_index(d),
                                                                      year);
            }
            if (demean) {
                const int pre = event_window(frame, cohort.members.front()).pre_periods;
                double tmean = 0.0;
                for (int l2 = 1; l2 <= pre; ++l2) {
                    tmean += detail::member_mean(frame.panel, member_idx,
                                                 cohort.cohort_year - l2) /
                             pre;
                }
                double smean = 0.0;
                for (int l2 = 1; l2 <= pre; ++l2) {
                    double s = 0.0;
                    for (const auto& d : donors) {
                        s += weights[c].at(d) *
                             frame.panel.value_in_year(frame.panel.unit_index(d),
                                                       cohort.cohort_year - l2);
                    }
                    smean += s / pre;
                }
                target -= tmean;
                synth -= smean;
            }
            cross += (static_cast<double>(cohort.members.size()) / total_members) *
                     (target - synth);
        }
        sum_sq += cross * cross;
    }
    return sum_sq / aligned;
}

} // namespace

TEST_CASE("singleton cohorts coincide with the member's own series in both fit modes") {
    auto [panel, schedule] = staggered_policy_fixture(3);
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 10, 4);

    for (Estimator est : {Estimator::Did, Estimator::Scm, Estimator::FeAscm}) {
        CohortEstimate avg = cohort_effects(frame, 2001, est, CohortFitMode::AverageOfUnits);
        CohortEstimate tgt = cohort_effects(frame, 2001, est, CohortFitMode::CohortAverageTarget);
        REQUIRE(avg.members == std::vector<std::string>{"MI"});
        for (const auto& [k, v] : avg.effect.by_event_time) {
            CHECK(v == doctest::Approx(tgt.effect.by_event_time.at(k)).epsilon(1e-10));
        }
    }
}

TEST_CASE("two identical members average to themselves") {
    std::vector<int> times;
    for (int t = 1; t <= 10; ++t) times.push_back(t);
    std::vector<double> series = {5, 6, 7, 6, 5, 6, 9, 9, 8, 9};
    std::vector<double> d1 = {4, 5, 6, 5, 4, 5, 5, 4, 5, 4};
    std::vector<double> d2 = {8, 7, 8, 9, 8, 7, 8, 9, 8, 7};
    Panel p = make_panel({"T1", "T2", "D1", "D2"}, times, {series, series, d1, d2});
    auto schedule = make_schedule(
        {{"T1", 7}, {"T2", 7}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, schedule, 2, 4);

    CohortEstimate avg = cohort_effects(frame, 7, Estimator::FeAscm,
                                        CohortFitMode::AverageOfUnits);
    EffectSeries solo = fe_ascm_effects(frame, "T1");
    for (const auto& [k, v] : avg.effect.by_event_time) {
        CHECK(v == doctest::Approx(solo.by_event_time.at(k)).epsilon(1e-9));
    }
}

TEST_CASE("DiD cohort estimates are identical across fit modes") {
    StudyFrame frame = two_cohort_frame(2.0);
    CohortEstimate a = cohort_effects(frame, 7, Estimator::Did, CohortFitMode::AverageOfUnits);
    CohortEstimate b = cohort_effects(frame, 7, Estimator::Did,
                                      CohortFitMode::CohortAverageTarget);
    for (const auto& [k, v] : a.effect.by_event_time) {
        CHECK(v == doctest::Approx(b.effect.by_event_time.at(k)).epsilon(1e-12));
    }
}

TEST_CASE("average-of-units equals the mean of the members' series") {
    StudyFrame frame = two_cohort_frame(1.0);
    CohortEstimate avg = cohort_effects(frame, 7, Estimator::FeAscm,
                                        CohortFitMode::AverageOfUnits);
    EffectSeries t1 = fe_ascm_effects(frame, "T1");
    EffectSeries t2 = fe_ascm_effects(frame, "T2");
    for (const auto& [k, v] : avg.effect.by_event_time) {
        CHECK(v == doctest::Approx((t1.by_event_time.at(k) + t2.by_event_time.at(k)) / 2.0)
                      .epsilon(1e-12));
    }
}

TEST_CASE("unknown cohort year raises") {
    StudyFrame frame = two_cohort_frame(0.0);
    CHECK_THROWS_AS(cohort_effects(frame, 1900, Estimator::Did,
                                   CohortFitMode::AverageOfUnits),
                    EstimationError);
}

TEST_CASE("overall att: one cohort passes through") {
    StudyFrame frame = two_cohort_frame(2.0);
    CohortEstimate c7 = cohort_effects(frame, 7, Estimator::Did, CohortFitMode::AverageOfUnits);
    CohortEstimate c9 = cohort_effects(frame, 9, Estimator::Did, CohortFitMode::AverageOfUnits);
    AttResult att = overall_att(frame, {c7, c9});
    // At event times only cohort 7 reaches, the aggregate equals its series.
    CHECK(att.by_event_time.at(3).estimate ==
          doctest::Approx(c7.effect.by_event_time.at(3)).epsilon(1e-12));
    CHECK(att.by_event_time.at(3).contributing_units == 2);
}

TEST_CASE("overall att: cohort-size weighting") {
    StudyFrame frame = two_cohort_frame(0.0);
    CohortEstimate c7 = cohort_effects(frame, 7, Estimator::Did, CohortFitMode::AverageOfUnits);
    CohortEstimate c9 = cohort_effects(frame, 9, Estimator::Did, CohortFitMode::AverageOfUnits);
    // Overwrite the point estimates with a hand-checkable pair.
    c7.effect.by_event_time[0] = 3.0; // two members
    c9.effect.by_event_time[0] = 6.0; // one member
    AttResult att = overall_att(frame, {c7, c9});
    CHECK(att.by_event_time.at(0).estimate == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(att.by_event_time.at(0).contributing_units == 3);
}

TEST_CASE("overall att: cohorts must cover the treated set exactly") {
    StudyFrame frame = two_cohort_frame(0.0);
    CohortEstimate c7 = cohort_effects(frame, 7, Estimator::Did, CohortFitMode::AverageOfUnits);
    CHECK_THROWS_AS(overall_att(frame, {c7}), EstimationError);
    CHECK_THROWS_AS(overall_att(frame, {c7, c7}), EstimationError);
}

TEST_CASE("overall att: staggered fixture contributing counts") {
    auto [panel, schedule] = staggered_policy_fixture(3);
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 10, 4);
    std::vector<CohortEstimate> cohorts;
    for (const auto& [year, members] : frame.cohorts()) {
        (void)members;
        cohorts.push_back(cohort_effects(frame, year, Estimator::Did,
                                         CohortFitMode::AverageOfUnits));
    }
    AttResult att = overall_att(frame, cohorts);
    CHECK(att.by_event_time.at(0).contributing_units == 36);
    CHECK(att.by_event_time.at(1).contributing_units == 35);
    CHECK(att.by_event_time.at(10).contributing_units == 31);

    // Counts never increase over the post window.
    int prev = att.by_event_time.at(0).contributing_units;
    for (const auto& [k, cell] : att.by_event_time) {
        if (k < 0) continue;
        CHECK(cell.contributing_units <= prev);
        prev = cell.contributing_units;
    }

    // The weighted-average invariant is recomputable from the cohort series.
    for (const auto& [k, cell] : att.by_event_time) {
        double weighted = 0.0;
        int n = 0;
        for (const auto& c : cohorts) {
            auto it = c.effect.by_event_time.find(k);
            if (it == c.effect.by_event_time.end()) continue;
            weighted += static_cast<double>(c.members.size()) * it->second;
            n += static_cast<int>(c.members.size());
        }
        CHECK(n == cell.contributing_units);
        CHECK(std::abs(cell.estimate - weighted / n) <= 1e-12 * std::max(1.0, std::abs(weighted)));
    }
}

TEST_CASE("stacked aggregation: singleton DiD cohorts reproduce the flat per-unit average") {
    // Three treated units with distinct adoption years.
    Rng rng(55);
    std::vector<int> times;
    for (int t = 1; t <= 14; ++t) times.push_back(t);
    std::vector<std::string> units = {"T1", "T2", "T3", "D1", "D2", "D3"};
    TreatmentSchedule schedule;
    schedule.set("T1", 7);
    schedule.set("T2", 8);
    schedule.set("T3", 10);
    for (const char* d : {"D1", "D2", "D3"}) schedule.set(d, std::nullopt);
    std::vector<double> outcomes;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const double level = rng.uniform(5.0, 9.0);
        for (int t : times) outcomes.push_back(level + rng.normal(0.0, 0.5));
    }
    Panel panel(units, times, std::move(outcomes));
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 4, 4);

    std::vector<CohortEstimate> cohorts;
    for (const auto& [year, members] : frame.cohorts()) {
        (void)members;
        cohorts.push_back(cohort_effects(frame, year, Estimator::Did,
                                         CohortFitMode::AverageOfUnits));
    }
    AttResult att = overall_att(frame, cohorts);

    std::vector<EffectSeries> singles;
    for (const auto& unit : frame.treated_units) singles.push_back(did_event_study(frame, unit));
    for (const auto& [k, cell] : att.by_event_time) {
        double sum = 0.0;
        int n = 0;
        for (const auto& s : singles) {
            auto it = s.by_event_time.find(k);
            if (it == s.by_event_time.end()) continue;
            sum += it->second;
            ++n;
        }
        REQUIRE(n == cell.contributing_units);
        CHECK(std::abs(cell.estimate - sum / n) <= 1e-12);
    }
}

TEST_CASE("aggregation order equivalence for average-of-units cohorts") {
    StudyFrame frame = two_cohort_frame(1.5);
    std::vector<CohortEstimate> cohorts;
    for (const auto& [year, members] : frame.cohorts()) {
        (void)members;
        cohorts.push_back(cohort_effects(frame, year, Estimator::FeAscm,
                                         CohortFitMode::AverageOfUnits));
    }
    AttResult att = overall_att(frame, cohorts);

    std::vector<EffectSeries> singles;
    for (const auto& unit : frame.treated_units) singles.push_back(fe_ascm_effects(frame, unit));
    for (const auto& [k, cell] : att.by_event_time) {
        double sum = 0.0;
        int n = 0;
        for (const auto& s : singles) {
            auto it = s.by_event_time.find(k);
            if (it == s.by_event_time.end()) continue;
            sum += it->second;
            ++n;
        }
        REQUIRE(n == cell.contributing_units);
        CHECK(std::abs(cell.estimate - sum / n) <= 1e-12 * std::max(1.0, std::abs(sum)));
    }
}

TEST_CASE("partially pooled fit: nu = 0 reproduces the independent cohort fits") {
    StudyFrame frame = two_cohort_frame(0.5);
    std::vector<int> years = {7, 9};
    PartiallyPooledFit fit = partially_pooled_fit(frame, years, 0.0, true);
    REQUIRE(fit.weights.size() == 2);

    for (std::size_t c = 0; c < years.size(); ++c) {
        CohortEstimate independent = cohort_effects(frame, years[c], Estimator::FeAscm,
                                                    CohortFitMode::CohortAverageTarget);
        const WeightVector& solo = *independent.effect.donor_weights;
        for (const auto& [donor, w] : fit.weights[c].weights) {
            CHECK(std::abs(w - solo.at(donor)) <= 1e-8);
        }
    }
}

TEST_CASE("partially pooled fit: a single cohort is invariant to nu") {
    auto [panel, schedule] = staggered_policy_fixture(3);
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 10, 4);
    std::vector<WeightVector> solutions;
    for (double nu : {0.0, 0.5, 1.0}) {
        PartiallyPooledFit fit = partially_pooled_fit(frame, {2001}, nu, true);
        solutions.push_back(fit.weights.front());
    }
    for (const auto& [donor, w] : solutions[0].weights) {
        CHECK(std::abs(w - solutions[1].at(donor)) <= 1e-7);
        CHECK(std::abs(w - solutions[2].at(donor)) <= 1e-7);
    }
}

TEST_CASE("partially pooled fit: the trade-off brackets hold at nu = 0.5") {
    StudyFrame frame = two_cohort_frame(0.8);
    std::vector<int> years = {7, 9};
    std::vector<CohortEstimate> cohorts;
    for (int y : years) {
        cohorts.push_back(cohort_effects(frame, y, Estimator::FeAscm,
                                         CohortFitMode::CohortAverageTarget));
    }

    PartiallyPooledFit at0 = partially_pooled_fit(frame, years, 0.0, true);
    PartiallyPooledFit at5 = partially_pooled_fit(frame, years, 0.5, true);
    PartiallyPooledFit at1 = partially_pooled_fit(frame, years, 1.0, true);

    const double pooled_at5 = pooled_pre_term(frame, cohorts, at5.weights, true);
    const double pooled_at0 = pooled_pre_term(frame, cohorts, at0.weights, true);
    const double pooled_at1 = pooled_pre_term(frame, cohorts, at1.weights, true);

    // Pooling cannot do worse on the pooled term than the unpooled solution,
    // and cannot do better on the separate terms.
    CHECK(pooled_at5 <= pooled_at0 + 1e-10);
    CHECK(pooled_at1 <= pooled_at5 + 1e-10);
    double sep_at5 = 0.0, sep_at0 = 0.0;
    for (std::size_t c = 0; c < years.size(); ++c) {
        sep_at5 += at5.weights[c].objective_value / years.size();
        sep_at0 += at0.weights[c].objective_value / years.size();
    }
    CHECK(sep_at0 <= sep_at5 + 1e-10);

    // The internal pooled-term report matches the independent evaluation.
    CHECK(std::abs(at5.pooled_objective - pooled_at5) <= 1e-7 * std::max(1.0, pooled_at5));

    // Certified descent: the recorded objective never increases.
    for (std::size_t i = 1; i < at5.objective_trace.size(); ++i) {
        CHECK(at5.objective_trace[i] <= at5.objective_trace[i - 1] + 1e-15);
    }

    // Optimality of each solution for its own objective (continuity check at
    // the evaluated grid points).
    auto combined = [&](double nu, const PartiallyPooledFit& f) {
        // Evaluate both terms at f's weights, independent of the solver's
        // own reporting (a one-cohort pooled term is that cohort's own fit).
        double sep = 0.0;
        for (std::size_t c = 0; c < years.size(); ++c) {
            sep += pooled_pre_term(frame, {cohorts[c]}, {f.weights[c]}, true) / years.size();
        }
        return nu * pooled_pre_term(frame, cohorts, f.weights, true) + (1.0 - nu) * sep;
    };
    CHECK(combined(0.5, at5) <= combined(0.5, at0) + 1e-9);
    CHECK(combined(0.5, at5) <= combined(0.5, at1) + 1e-9);
    CHECK(combined(0.0, at0) <= combined(0.0, at5) + 1e-9);
    CHECK(combined(1.0, at1) <= combined(1.0, at5) + 1e-9);
}

TEST_CASE("partially pooled fit: input validation") {
    StudyFrame frame = two_cohort_frame(0.0);
    CHECK_THROWS_AS(partially_pooled_fit(frame, {}, 0.5, true), EstimationError);
    CHECK_THROWS_AS(partially_pooled_fit(frame, {7}, 1.5, true), ValidationError);
}

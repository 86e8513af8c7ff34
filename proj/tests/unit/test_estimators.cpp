#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "panelkit/errors.hpp"
#include "panelkit/estimators.hpp"
#include "panelkit/fixtures.hpp"
#include "panelkit/rng.hpp"
#include "test_util.hpp"

using namespace panelkit;
using pktest::make_panel;
using pktest::make_schedule;

namespace {

// Two never-treated donors around a focal unit adopting at period 4.
StudyFrame two_donor_frame() {
    Panel p = make_panel({"F", "D1", "D2"}, {1, 2, 3, 4, 5, 6},
                         {{10, 12, 11, 15, 16, 13},
                          {8, 9, 10, 11, 12, 13},
                          {20, 18, 19, 17, 16, 18}});
    auto s = make_schedule({{"F", 4}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    return apply_inclusion_filter(p, s, 2, 3);
}

} // namespace

TEST_CASE("two-by-two table from block means") {
    // Published-style block means; the estimate is pinned by the arithmetic.
    TwoByTwoTable t = two_by_two_from_means(616.95, 417.25, 431.88, 326.19);
    CHECK(std::abs(t.did_estimate - 94.01) <= 1e-12);
    CHECK(std::abs(t.did_estimate -
                   ((t.focal_post - t.focal_pre) - (t.donor_post - t.donor_pre))) <= 1e-12);
}

TEST_CASE("two-by-two: identical series cancel") {
    Panel p = make_panel({"F", "D"}, {1, 2, 3, 4, 5},
                         {{7, 8, 9, 10, 11}, {7, 8, 9, 10, 11}});
    auto s = make_schedule({{"F", 4}, {"D", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 1, 3);
    CHECK(did_two_by_two(frame, "F").did_estimate == 0.0);
}

TEST_CASE("two-by-two: toy block means") {
    Panel p = make_panel({"F", "D"}, {1, 2, 3}, {{10, 10, 20}, {10, 10, 15}});
    auto s = make_schedule({{"F", 3}, {"D", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 0, 2);
    TwoByTwoTable t = did_two_by_two(frame, "F");
    CHECK(t.focal_pre == 10.0);
    CHECK(t.focal_post == 20.0);
    CHECK(t.donor_post == 15.0);
    CHECK(t.did_estimate == 5.0);
}

TEST_CASE("event-study DiD: hand-computed values on the two-donor panel") {
    StudyFrame frame = two_donor_frame();
    EffectSeries series = did_event_study(frame, "F");

    CHECK(series.by_event_time.at(-3) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(series.by_event_time.at(-2) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(series.by_event_time.at(-1) == 0.0); // exactly, by construction
    CHECK(series.by_event_time.at(0) == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(series.by_event_time.at(1) == doctest::Approx(5.5).epsilon(1e-12));
    CHECK(series.by_event_time.at(2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(series.by_event_time.size() == 6); // contiguous over the window
}

TEST_CASE("event-study DiD: a level shift of the focal unit changes nothing") {
    Panel base = make_panel({"F", "D1", "D2"}, {1, 2, 3, 4, 5, 6},
                            {{14.0, 13.5, 14.5, 14.0, 15.0, 15.5},
                             {8, 9, 10, 11, 12, 13},
                             {20, 18, 19, 17, 16, 18}});
    // F equals the donor average plus a constant, so every estimate is zero.
    std::vector<std::vector<double>> rows = {{0, 0, 0, 0, 0, 0},
                                             {8, 9, 10, 11, 12, 13},
                                             {20, 18, 19, 17, 16, 18}};
    for (int t = 0; t < 6; ++t) rows[0][t] = (rows[1][t] + rows[2][t]) / 2.0 + 3.25;
    Panel p = make_panel({"F", "D1", "D2"}, {1, 2, 3, 4, 5, 6}, rows);
    auto s = make_schedule({{"F", 4}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 2, 3);
    EffectSeries series = did_event_study(frame, "F");
    for (const auto& [k, v] : series.by_event_time) {
        (void)k;
        CHECK(std::abs(v) <= 1e-12);
    }
    CHECK(*series.rmspe <= 1e-12);
}

TEST_CASE("scm fit: exact donor match gets weight one with either demeaning") {
    Panel p = make_panel({"F", "D1", "D2"}, {1, 2, 3, 4, 5},
                         {{5, 7, 6, 9, 9}, {5, 7, 6, 9, 2}, {11, 3, 8, 2, 4}});
    auto s = make_schedule({{"F", 5}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 0, 4);
    for (bool demean : {false, true}) {
        WeightVector w = scm_fit(frame, "F", demean);
        CHECK(w.at("D1") == doctest::Approx(1.0).epsilon(1e-7));
        CHECK(w.objective_value <= 1e-14);
    }
}

TEST_CASE("scm fit: demeaning absorbs a level offset that the raw fit cannot") {
    // F tracks D1 shifted up by 50; D2 is unrelated.
    Panel p = make_panel({"F", "D1", "D2"}, {1, 2, 3, 4, 5, 6},
                         {{53, 55, 52, 57, 54, 60},
                          {3, 5, 2, 7, 4, 9},
                          {30, 10, 25, 15, 20, 12}});
    auto s = make_schedule({{"F", 6}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 0, 5);

    WeightVector demeaned = scm_fit(frame, "F", true);
    CHECK(demeaned.at("D1") == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(demeaned.objective_value <= 1e-12);

    WeightVector raw = scm_fit(frame, "F", false);
    CHECK(raw.objective_value > 1.0); // no convex mix reaches the shifted level

    // Direct evaluation of the demeaned objective at weight one on D1.
    const std::vector<double> focal = {53, 55, 52, 57, 54};
    const std::vector<double> donor = {3, 5, 2, 7, 4};
    double fm = 0, dm = 0;
    for (int i = 0; i < 5; ++i) {
        fm += focal[i] / 5.0;
        dm += donor[i] / 5.0;
    }
    double direct = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double gap = (focal[i] - fm) - (donor[i] - dm);
        direct += gap * gap / 5.0;
    }
    CHECK(direct <= 1e-12);
}

TEST_CASE("scm effects: weight one on an identical donor gives a zero gap series") {
    Panel p = make_panel({"F", "D"}, {1, 2, 3, 4, 5}, {{4, 6, 5, 7, 8}, {4, 6, 5, 7, 8}});
    auto s = make_schedule({{"F", 4}, {"D", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 1, 3);
    WeightVector w;
    w.weights = {{"D", 1.0}};
    EffectSeries series = scm_effects(frame, "F", w);
    for (const auto& [k, v] : series.by_event_time) {
        (void)k;
        CHECK(v == 0.0);
    }
    CHECK(*series.rmspe == 0.0);
}

TEST_CASE("scm effects: pre-period mean square matches the solver objective") {
    auto [panel, schedule] = staggered_policy_fixture(23);
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 10, 4);

    for (const std::string focal : {"OH", "WV", "TX"}) {
        WeightVector w = scm_fit(frame, focal, false);
        EffectSeries series = scm_effects(frame, focal, w);
        double mean_sq = 0.0;
        int n = 0;
        for (const auto& [k, v] : series.by_event_time) {
            if (k < 0) {
                mean_sq += v * v;
                ++n;
            }
        }
        mean_sq /= n;
        CHECK(std::abs(mean_sq - w.objective_value) <= 1e-9 * std::max(1.0, w.objective_value));

        // Demeaned case: the residualized gaps are the augmented series.
        WeightVector wd = scm_fit(frame, focal, true);
        EffectSeries fe = fe_ascm_effects_with_weights(frame, focal, wd);
        double mean_sq_dm = 0.0;
        n = 0;
        for (const auto& [k, v] : fe.by_event_time) {
            if (k < 0) {
                mean_sq_dm += v * v;
                ++n;
            }
        }
        mean_sq_dm /= n;
        CHECK(std::abs(mean_sq_dm - wd.objective_value) <=
              1e-9 * std::max(1.0, wd.objective_value));
    }
}

TEST_CASE("fe-ascm: hand-computed weighted DiD averaged over two pre periods") {
    Panel p = make_panel({"F", "D1", "D2"}, {1, 2, 3},
                         {{10, 14, 18}, {9, 13, 14}, {20, 20, 21}});
    auto s = make_schedule({{"F", 3}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 0, 2);

    WeightVector w;
    w.weights = {{"D1", 0.7}, {"D2", 0.3}};
    EffectSeries series = fe_ascm_effects_with_weights(frame, "F", w);
    CHECK(series.by_event_time.at(0) == doctest::Approx(3.6).epsilon(1e-12));
    CHECK(series.by_event_time.at(-2) == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(series.by_event_time.at(-1) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("fe-ascm with uniform weights recovers the pre-period-averaged DiD") {
    StudyFrame frame = two_donor_frame();
    const std::vector<std::string> donors = donor_set(frame, "F");
    WeightVector uniform;
    for (const auto& d : donors) uniform.weights.emplace(d, 1.0 / donors.size());

    EffectSeries series = fe_ascm_effects_with_weights(frame, "F", uniform);

    // Direct average of per-pre-period DiD estimates.
    const Panel& p = frame.panel;
    const int fu = p.unit_index("F");
    const int adoption = 4;
    const int pre = event_window(frame, "F").pre_periods;
    for (const auto& [k, value] : series.by_event_time) {
        double acc = 0.0;
        for (int lag = 1; lag <= pre; ++lag) {
            double donor_change = 0.0;
            for (const auto& d : donors) {
                const int du = p.unit_index(d);
                donor_change += (p.value_in_year(du, adoption + k) -
                                 p.value_in_year(du, adoption - lag)) /
                                donors.size();
            }
            acc += (p.value_in_year(fu, adoption + k) - p.value_in_year(fu, adoption - lag)) -
                   donor_change;
        }
        CHECK(std::abs(value - acc / pre) <= 1e-12);
    }
}

TEST_CASE("fe-ascm with a single donor equals the pre-averaged DiD against it") {
    Panel p = make_panel({"F", "D"}, {1, 2, 3, 4, 5, 6},
                         {{3, 8, 5, 9, 12, 7}, {2, 4, 9, 3, 6, 5}});
    auto s = make_schedule({{"F", 5}, {"D", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 1, 4);
    WeightVector w;
    w.weights = {{"D", 1.0}};
    EffectSeries series = fe_ascm_effects_with_weights(frame, "F", w);
    for (const auto& [k, value] : series.by_event_time) {
        double acc = 0.0;
        for (int lag = 1; lag <= 4; ++lag) {
            acc += (p.value_in_year(0, 5 + k) - p.value_in_year(0, 5 - lag)) -
                   (p.value_in_year(1, 5 + k) - p.value_in_year(1, 5 - lag));
        }
        CHECK(std::abs(value - acc / 4.0) <= 1e-12);
    }
}

TEST_CASE("fe-ascm bias estimate is the level offset, constant across event times") {
    auto [panel, schedule] = staggered_policy_fixture(31);
    StudyFrame frame = apply_inclusion_filter(panel, schedule, 10, 4);
    WeightVector w = scm_fit(frame, "WV", true);
    std::map<int, double> bias = fe_ascm_bias(frame, "WV", w);
    const double first = bias.begin()->second;
    for (const auto& [k, v] : bias) {
        (void)k;
        CHECK(v == doctest::Approx(first).epsilon(1e-9));
    }
}

TEST_CASE("rmspe") {
    EffectSeries series;
    series.estimator = Estimator::Scm;
    series.focal = "F";
    series.by_event_time = {{-2, 3.0}, {-1, 4.0}, {0, 99.0}};
    CHECK(rmspe(series) == doctest::Approx(3.5355339059).epsilon(1e-9));

    series.by_event_time = {{-2, 0.0}, {-1, 0.0}, {0, 5.0}};
    CHECK(rmspe(series) == 0.0);

    // The stored zero at event time -1 is excluded for DiD series.
    EffectSeries did;
    did.estimator = Estimator::Did;
    did.focal = "F";
    did.by_event_time = {{-2, 3.0}, {-1, 0.0}, {0, 1.0}};
    CHECK(rmspe(did) == doctest::Approx(3.0).epsilon(1e-12));

    did.by_event_time = {{-1, 0.0}, {0, 1.0}};
    CHECK_THROWS_AS(rmspe(did), EstimationError);
}

TEST_CASE("common shocks cancel in every estimator") {
    // The shocked panel's cells are themselves rounded, so the achievable
    // agreement degrades linearly with the outcome scale; at outcome scale
    // ~8 the 1e-9 bound carries two orders of headroom, and a crime-scale
    // run is checked at 1e-8 as a regression guard.
    auto [raw_panel, schedule] = staggered_policy_fixture(47);

    for (const double scale_divisor : {100.0, 1.0}) {
        const double tol = scale_divisor == 1.0 ? 1e-8 : 1e-9;
        std::vector<double> base_values;
        for (int u = 0; u < raw_panel.n_units(); ++u) {
            for (int t = 0; t < raw_panel.n_times(); ++t) {
                base_values.push_back(raw_panel.at(u, t) / scale_divisor);
            }
        }
        Panel panel(raw_panel.units(), raw_panel.times(), std::move(base_values));
        StudyFrame frame = apply_inclusion_filter(panel, schedule, 8, 4);

        // Add an arbitrary per-period constant to every unit.
        Rng rng(7);
        std::vector<double> shocks(static_cast<std::size_t>(panel.n_times()));
        for (auto& v : shocks) v = rng.uniform(-80.0, 80.0) / scale_divisor;
        std::vector<double> shifted;
        for (int u = 0; u < panel.n_units(); ++u) {
            for (int t = 0; t < panel.n_times(); ++t) {
                shifted.push_back(panel.at(u, t) + shocks[static_cast<std::size_t>(t)]);
            }
        }
        Panel shifted_panel(panel.units(), panel.times(), std::move(shifted));
        StudyFrame shifted_frame = apply_inclusion_filter(shifted_panel, schedule, 8, 4);

        for (const std::string focal : {"OH", "ME", "WI"}) {
            EffectSeries did_a = did_event_study(frame, focal);
            EffectSeries did_b = did_event_study(shifted_frame, focal);
            for (const auto& [k, v] : did_a.by_event_time) {
                CHECK(std::abs(v - did_b.by_event_time.at(k)) <= tol);
            }

            WeightVector wa = scm_fit(frame, focal, false);
            WeightVector wb = scm_fit(shifted_frame, focal, false);
            EffectSeries scm_a = scm_effects(frame, focal, wa);
            EffectSeries scm_b = scm_effects(shifted_frame, focal, wb);
            for (const auto& [k, v] : scm_a.by_event_time) {
                CHECK(std::abs(v - scm_b.by_event_time.at(k)) <= tol);
            }

            EffectSeries fe_a = fe_ascm_effects(frame, focal);
            EffectSeries fe_b = fe_ascm_effects(shifted_frame, focal);
            for (const auto& [k, v] : fe_a.by_event_time) {
                CHECK(std::abs(v - fe_b.by_event_time.at(k)) <= tol);
            }
        }
    }
}

TEST_CASE("exact convex combinations are recovered with zero pre-period gap") {
    // F = 0.3 D1 + 0.7 D2 before adoption; afterwards a constant effect of 4
    // is added on top of the same combination.
    std::vector<int> times;
    for (int t = 1; t <= 12; ++t) times.push_back(t);
    Rng rng(99);
    std::vector<double> d1, d2;
    for (std::size_t i = 0; i < times.size(); ++i) {
        d1.push_back(rng.uniform(10.0, 20.0));
        d2.push_back(rng.uniform(30.0, 40.0));
    }
    std::vector<double> f;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double base = 0.3 * d1[i] + 0.7 * d2[i];
        f.push_back(times[i] >= 9 ? base + 4.0 : base);
    }
    Panel p = make_panel({"F", "D1", "D2"}, times, {f, d1, d2});
    auto s = make_schedule({{"F", 9}, {"D1", std::nullopt}, {"D2", std::nullopt}});
    StudyFrame frame = apply_inclusion_filter(p, s, 3, 4);

    WeightVector w = scm_fit(frame, "F", false);
    CHECK(w.at("D1") == doctest::Approx(0.3).epsilon(1e-6));
    EffectSeries series = scm_effects(frame, "F", w);
    for (const auto& [k, v] : series.by_event_time) {
        if (k < 0) {
            CHECK(std::abs(v) <= 1e-8);
        } else {
            CHECK(v == doctest::Approx(4.0).epsilon(1e-8));
        }
    }
}

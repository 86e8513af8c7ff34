#include "panelkit/fixtures.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "panelkit/rng.hpp"

namespace panelkit {

namespace {

struct AdoptionEntry {
    const char* unit;
    int year; // 0 = never treated
};

// Staggered rollout used by the bookkeeping fixtures: 8 never-treated units,
// 5 treated before the 1977 window opens, IN with only three pre periods, and
// 36 evaluable adopters (single-unit cohorts at 1987, 1991 and 2001; the last
// adoption lands in the final panel year).
constexpr AdoptionEntry kAdoptions[] = {
    {"AK", 1994}, {"AL", 1975}, {"AR", 1995}, {"AZ", 1994}, {"CA", 0},    {"CO", 2003},
    {"CT", 1969}, {"DE", 0},    {"FL", 1987}, {"GA", 1989}, {"HI", 0},    {"IA", 2011},
    {"ID", 1990}, {"IL", 2014}, {"IN", 1980}, {"KS", 2007}, {"KY", 1996}, {"LA", 1996},
    {"MA", 0},    {"MD", 0},    {"ME", 1985}, {"MI", 2001}, {"MN", 2003}, {"MO", 2004},
    {"MS", 1990}, {"MT", 1991}, {"NC", 1995}, {"ND", 1985}, {"NE", 2007}, {"NH", 1959},
    {"NJ", 0},    {"NM", 2004}, {"NV", 1995}, {"NY", 0},    {"OH", 2004}, {"OK", 1995},
    {"OR", 1990}, {"PA", 1989}, {"RI", 0},    {"SC", 1996}, {"SD", 1986}, {"TN", 1994},
    {"TX", 1995}, {"UT", 1995}, {"VA", 1988}, {"VT", 1970}, {"WA", 1961}, {"WI", 2011},
    {"WV", 1989}, {"WY", 1994},
};

std::vector<int> year_range(int first, int last) {
    std::vector<int> years;
    for (int t = first; t <= last; ++t) years.push_back(t);
    return years;
}

} // namespace

std::pair<Panel, TreatmentSchedule> staggered_policy_fixture(std::uint64_t seed) {
    const int first = 1977, last = 2014;
    const std::vector<int> times = year_range(first, last);
    std::vector<std::string> units;
    TreatmentSchedule schedule;
    for (const auto& entry : kAdoptions) {
        units.emplace_back(entry.unit);
        schedule.set(entry.unit, entry.year == 0 ? std::nullopt : std::optional<int>(entry.year));
    }

    Rng rng(seed);
    std::vector<double> outcomes;
    outcomes.reserve(units.size() * times.size());
    for (std::size_t u = 0; u < units.size(); ++u) {
        const double level = rng.uniform(250.0, 650.0);
        const double loading = rng.uniform(0.5, 1.5);
        for (int t : times) {
            // National hump peaking in the early 1990s, scaled per unit.
            const double hump = 120.0 * std::exp(-std::pow((t - 1993.0) / 11.0, 2.0));
            outcomes.push_back(level + loading * hump + rng.normal(0.0, 12.0));
        }
    }
    return {Panel(std::move(units), times, std::move(outcomes)), std::move(schedule)};
}

std::pair<Panel, TreatmentSchedule> toy_fixture(std::uint64_t seed, double injected_effect) {
    const std::vector<int> times = year_range(2000, 2011);
    const std::vector<std::string> units = {"T1", "T2", "D1", "D2", "D3", "D4"};
    TreatmentSchedule schedule;
    schedule.set("T1", 2005);
    schedule.set("T2", 2008);
    for (const char* d : {"D1", "D2", "D3", "D4"}) schedule.set(d, std::nullopt);

    Rng rng(seed);
    std::vector<double> outcomes;
    for (const auto& unit : units) {
        const double level = rng.uniform(50.0, 100.0);
        const double slope = rng.uniform(0.5, 1.5);
        const auto adoption = schedule.at(unit);
        for (int t : times) {
            double y = level + slope * (t - 2000) + rng.normal(0.0, 0.5);
            if (adoption && t >= *adoption) y += injected_effect;
            outcomes.push_back(y);
        }
    }
    return {Panel(units, times, std::move(outcomes)), std::move(schedule)};
}

std::pair<Panel, TreatmentSchedule> trend_factor_fixture(std::uint64_t seed,
                                                         const TrendPanelSpec& spec) {
    const std::vector<int> times = year_range(1, spec.n_periods);
    std::vector<std::string> units;
    std::vector<double> loadings;
    TreatmentSchedule schedule;

    Rng rng(seed);
    for (int d = 0; d < spec.n_donors; ++d) {
        units.push_back("C" + std::to_string(d + 1));
        // Donor loadings spread evenly so treated trends lie inside the hull.
        loadings.push_back((d + 0.5) / static_cast<double>(spec.n_donors));
        schedule.set(units.back(), std::nullopt);
    }
    for (int j = 0; j < spec.n_treated; ++j) {
        units.push_back("T" + std::to_string(j + 1));
        // Treated units trend faster than the donor average, so the plain
        // mean comparison is biased by construction.
        loadings.push_back(rng.uniform(0.55, 0.95));
        const int cohort = j % spec.n_cohorts;
        schedule.set(units.back(), spec.first_adoption + 2 * cohort);
    }

    std::vector<double> shocks;
    for (int t = 0; t < spec.n_periods; ++t) shocks.push_back(rng.normal(0.0, 0.3));

    std::vector<double> outcomes;
    const double mid = (spec.n_periods + 1) / 2.0;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const double level = rng.uniform(5.0, 15.0);
        for (int t : times) {
            const double trend = spec.trend_scale * (t - mid);
            outcomes.push_back(level + shocks[static_cast<std::size_t>(t - 1)] +
                               loadings[u] * trend + rng.normal(0.0, spec.noise_sd));
        }
    }
    return {Panel(std::move(units), times, std::move(outcomes)), std::move(schedule)};
}

std::pair<Panel, TreatmentSchedule> null_noise_fixture(std::uint64_t seed,
                                                       const NullPanelSpec& spec) {
    const std::vector<int> times = year_range(1, spec.n_periods);
    std::vector<std::string> units;
    TreatmentSchedule schedule;

    const int n_donors = spec.n_units - spec.n_treated;
    for (int d = 0; d < n_donors; ++d) {
        units.push_back("C" + std::to_string(d + 1));
        schedule.set(units.back(), std::nullopt);
    }
    for (int j = 0; j < spec.n_treated; ++j) {
        units.push_back("T" + std::to_string(j + 1));
        const int cohort = j % spec.n_cohorts;
        schedule.set(units.back(), spec.first_adoption + 2 * cohort);
    }

    Rng rng(seed);
    std::vector<double> outcomes;
    for (std::size_t u = 0; u < units.size(); ++u) {
        const double level = rng.normal(0.0, 1.0);
        for (int t : times) {
            (void)t;
            outcomes.push_back(level + rng.normal(0.0, spec.noise_sd));
        }
    }
    return {Panel(std::move(units), times, std::move(outcomes)), std::move(schedule)};
}

} // namespace panelkit

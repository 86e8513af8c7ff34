#ifndef PANELKIT_FIXTURES_HPP
#define PANELKIT_FIXTURES_HPP

#include <cstdint>
#include <utility>

#include "panelkit/panel.hpp"

namespace panelkit {

/// Synthetic test panels shipped with the toolkit (also emitted by the
/// `export-fixtures` subcommand). Outcomes are generated from a seeded factor
/// model, so fixtures are deterministic.

/// 6-unit, 12-period toy panel: two adoption cohorts plus never-treated
/// donors; a known constant effect is added from adoption onward.
std::pair<Panel, TreatmentSchedule> toy_fixture(std::uint64_t seed, double injected_effect);

/// 50-unit, 1977-2014 panel mirroring a staggered state-policy rollout:
/// 8 never-treated units, 5 units already treated before the window, one
/// short-pre-period unit, and 36 evaluable adopters with single-year cohorts
/// at 1987, 1991 and 2001. Null effect.
std::pair<Panel, TreatmentSchedule> staggered_policy_fixture(std::uint64_t seed);

/// Factor-model panel with unit-specific trends for bias simulations:
/// outcome = unit level + period shock + loading * trend + noise, with
/// treated units drawn from the upper part of the loading range so simple
/// mean comparisons are biased by construction. Zero treatment effect.
struct TrendPanelSpec {
    int n_donors = 16;
    int n_treated = 8;
    int n_periods = 20;
    int first_adoption = 13;
    int n_cohorts = 2;
    double trend_scale = 1.0;
    double noise_sd = 0.25;
};

std::pair<Panel, TreatmentSchedule> trend_factor_fixture(std::uint64_t seed,
                                                         const TrendPanelSpec& spec);

/// Independent-noise null panel for coverage simulations.
struct NullPanelSpec {
    int n_units = 30;
    int n_treated = 10;
    int n_periods = 16;
    int first_adoption = 9;
    int n_cohorts = 2;
    double noise_sd = 1.0;
};

std::pair<Panel, TreatmentSchedule> null_noise_fixture(std::uint64_t seed,
                                                       const NullPanelSpec& spec);

} // namespace panelkit

#endif

#include "panelkit/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "panelkit/errors.hpp"

namespace panelkit {

Panel::Panel(std::vector<std::string> units, std::vector<int> times,
             std::vector<double> outcomes, std::vector<std::uint8_t> observed)
    : units_(std::move(units)), times_(std::move(times)),
      outcomes_(std::move(outcomes)), observed_(std::move(observed)) {
    validate();
    build_lookup();
}

Panel::Panel(std::vector<std::string> units, std::vector<int> times,
             std::vector<double> outcomes)
    : units_(std::move(units)), times_(std::move(times)), outcomes_(std::move(outcomes)),
      observed_(units_.size() * times_.size(), 1) {
    validate();
    build_lookup();
}

void Panel::validate() const {
    if (units_.empty()) throw ValidationError("panel has no units");
    if (times_.empty()) throw ValidationError("panel has no time periods");
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (times_[i] != times_[i - 1] + 1) {
            std::ostringstream msg;
            msg << "panel times must increase in steps of 1; found " << times_[i - 1]
                << " followed by " << times_[i];
            throw ValidationError(msg.str());
        }
    }
    const std::size_t cells = units_.size() * times_.size();
    if (outcomes_.size() != cells || observed_.size() != cells) {
        throw ValidationError("panel outcome matrix does not match units x times");
    }
    for (std::size_t i = 0; i < outcomes_.size(); ++i) {
        if (observed_[i] && !std::isfinite(outcomes_[i])) {
            throw ValidationError("panel contains a non-finite observed outcome");
        }
    }
    std::set<std::string> seen;
    for (const auto& u : units_) {
        if (!seen.insert(u).second) {
            throw ValidationError("duplicate unit identifier: " + u);
        }
    }
}

void Panel::build_lookup() {
    unit_lookup_.clear();
    unit_lookup_.reserve(units_.size());
    for (std::size_t i = 0; i < units_.size(); ++i) {
        unit_lookup_.emplace(units_[i], static_cast<int>(i));
    }
}

int Panel::time_index(int t) const {
    if (!contains_time(t)) {
        std::ostringstream msg;
        msg << "period " << t << " lies outside the panel window [" << first_time() << ", "
            << last_time() << "]";
        throw ValidationError(msg.str());
    }
    return t - first_time();
}

int Panel::unit_index(const std::string& unit) const {
    auto it = unit_lookup_.find(unit);
    return it == unit_lookup_.end() ? -1 : it->second;
}

bool Panel::fully_observed() const {
    return std::all_of(observed_.begin(), observed_.end(), [](std::uint8_t b) { return b != 0; });
}

Panel Panel::without_units(const std::vector<std::string>& drop) const {
    std::set<std::string> dropped(drop.begin(), drop.end());
    std::vector<std::string> units;
    std::vector<double> outcomes;
    std::vector<std::uint8_t> observed;
    const std::size_t T = times_.size();
    for (std::size_t u = 0; u < units_.size(); ++u) {
        if (dropped.count(units_[u])) continue;
        units.push_back(units_[u]);
        outcomes.insert(outcomes.end(), outcomes_.begin() + static_cast<std::ptrdiff_t>(u * T),
                        outcomes_.begin() + static_cast<std::ptrdiff_t>((u + 1) * T));
        observed.insert(observed.end(), observed_.begin() + static_cast<std::ptrdiff_t>(u * T),
                        observed_.begin() + static_cast<std::ptrdiff_t>((u + 1) * T));
    }
    return Panel(std::move(units), times_, std::move(outcomes), std::move(observed));
}

std::optional<int> TreatmentSchedule::at(const std::string& unit) const {
    auto it = adoption_.find(unit);
    if (it == adoption_.end()) {
        throw ValidationError("treatment schedule has no entry for unit " + unit);
    }
    return it->second;
}

TreatmentSchedule TreatmentSchedule::without_units(const std::vector<std::string>& drop) const {
    std::set<std::string> dropped(drop.begin(), drop.end());
    std::map<std::string, std::optional<int>> kept;
    for (const auto& [unit, time] : adoption_) {
        if (!dropped.count(unit)) kept.emplace(unit, time);
    }
    return TreatmentSchedule(std::move(kept));
}

bool StudyFrame::is_treated(const std::string& unit) const {
    return std::find(treated_units.begin(), treated_units.end(), unit) != treated_units.end();
}

int StudyFrame::adoption_year(const std::string& focal) const {
    if (!is_treated(focal)) {
        throw EstimationError("unit " + focal + " is not an evaluable treated unit");
    }
    return *schedule.at(focal);
}

std::map<int, std::vector<std::string>> StudyFrame::cohorts() const {
    std::map<int, std::vector<std::string>> out;
    for (const auto& unit : treated_units) {
        out[*schedule.at(unit)].push_back(unit);
    }
    return out;
}

namespace {

// Fully observed over [from_year, to_year]?
bool observed_over(const Panel& panel, int u, int from_year, int to_year) {
    for (int t = from_year; t <= to_year; ++t) {
        if (!panel.observed_in_year(u, t)) return false;
    }
    return true;
}

} // namespace

StudyFrame apply_inclusion_filter(const Panel& panel, const TreatmentSchedule& schedule,
                                  int post_horizon, int min_pre_periods) {
    if (min_pre_periods < 1) throw ValidationError("min_pre_periods must be at least 1");
    if (post_horizon < 0) throw ValidationError("post_horizon must be non-negative");

    for (const auto& [unit, time] : schedule.entries()) {
        (void)time;
        if (panel.unit_index(unit) < 0) {
            throw ValidationError("treatment schedule references unknown unit " + unit);
        }
    }
    for (const auto& unit : panel.units()) {
        if (!schedule.has(unit)) {
            throw ValidationError("treatment schedule has no entry for unit " + unit);
        }
    }

    const int first = panel.first_time();
    const int last = panel.last_time();

    std::vector<ExclusionRecord> exclusions;
    std::vector<std::string> drop_entirely;
    for (const auto& unit : panel.units()) {
        auto adoption = schedule.at(unit);
        if (adoption && *adoption <= first) {
            exclusions.push_back({unit, "already treated at the panel start; removed from panel",
                                  /*dropped_from_panel=*/true});
            drop_entirely.push_back(unit);
        }
    }

    Panel filtered = drop_entirely.empty() ? panel : panel.without_units(drop_entirely);
    TreatmentSchedule kept = schedule.without_units(drop_entirely);

    std::vector<std::string> treated;
    std::map<std::string, int> pre_counts;
    for (const auto& unit : filtered.units()) {
        auto adoption = kept.at(unit);
        if (!adoption) continue; // never treated
        const int u = filtered.unit_index(unit);
        const int adopt = *adoption;
        if (adopt > last) {
            exclusions.push_back({unit, "adopts after the panel window; donor candidate only"});
            continue;
        }
        int observed_pre = 0;
        for (int t = first; t < adopt; ++t) {
            if (filtered.observed_in_year(u, t)) ++observed_pre;
        }
        pre_counts[unit] = observed_pre;
        if (observed_pre < min_pre_periods) {
            std::ostringstream reason;
            reason << "only " << observed_pre << " observed pre-treatment periods (minimum "
                   << min_pre_periods << "); donor candidate only";
            exclusions.push_back({unit, reason.str()});
            continue;
        }
        // Focal units must have complete data over the fit window and the
        // evaluated post window.
        const int post_end = std::min(adopt + post_horizon, last);
        if (!observed_over(filtered, u, first, adopt - 1) ||
            !observed_over(filtered, u, adopt, post_end)) {
            exclusions.push_back(
                {unit, "missing outcomes inside its evaluation window; donor candidate only"});
            continue;
        }
        treated.push_back(unit);
    }

    if (treated.empty()) {
        throw EstimationError("no evaluable treated units remain after filtering");
    }

    return StudyFrame{std::move(filtered), std::move(kept), post_horizon, min_pre_periods,
                      std::move(treated), std::move(pre_counts), std::move(exclusions)};
}

std::vector<std::string> donor_set(const StudyFrame& frame, const std::string& focal) {
    const int adopt = frame.adoption_year(focal); // validates focal
    const Panel& panel = frame.panel;
    const int focal_idx = panel.unit_index(focal);
    const int fit_start = panel.first_time();
    const int eval_end = std::min(adopt + frame.post_horizon, panel.last_time());

    std::vector<std::string> donors;
    for (const auto& unit : panel.units()) {
        const int u = panel.unit_index(unit);
        if (u == focal_idx) continue;
        auto adoption = frame.schedule.at(unit);
        if (adoption && *adoption < adopt + frame.post_horizon + 1) continue;
        if (!observed_over(panel, u, fit_start, eval_end)) continue;
        donors.push_back(unit);
    }
    if (donors.empty()) {
        std::ostringstream msg;
        msg << "no valid donors for " << focal << " at post horizon " << frame.post_horizon;
        throw EstimationError(msg.str());
    }
    return donors;
}

EventWindow event_window(const StudyFrame& frame, const std::string& focal) {
    const int adopt = frame.adoption_year(focal);
    EventWindow w;
    w.pre_periods = adopt - frame.panel.first_time();
    w.max_post = std::min(frame.post_horizon, frame.panel.last_time() - adopt);
    return w;
}

Panel transform_outcome(const Panel& panel, OutcomeTransform transform) {
    if (transform == OutcomeTransform::Identity) return panel;

    std::vector<double> values;
    std::vector<std::uint8_t> observed;
    values.reserve(static_cast<std::size_t>(panel.n_units()) * panel.n_times());
    observed.reserve(values.capacity());

    std::ostringstream offenders;
    int n_offending = 0;
    for (int u = 0; u < panel.n_units(); ++u) {
        for (int ti = 0; ti < panel.n_times(); ++ti) {
            const bool obs = panel.observed(u, ti);
            const double y = panel.at(u, ti);
            observed.push_back(obs ? 1 : 0);
            if (!obs) {
                values.push_back(y);
                continue;
            }
            if (y <= 0.0) {
                if (n_offending < 20) {
                    offenders << (n_offending ? ", " : "") << "(" << panel.unit_name(u) << ", "
                              << panel.times()[static_cast<std::size_t>(ti)] << ")";
                }
                ++n_offending;
                values.push_back(y);
                continue;
            }
            values.push_back(std::log(y));
        }
    }
    if (n_offending > 0) {
        std::ostringstream msg;
        msg << "log transform requires positive outcomes; " << n_offending
            << " non-positive cell(s): " << offenders.str();
        if (n_offending > 20) msg << ", ...";
        throw ValidationError(msg.str());
    }
    return Panel(panel.units(), panel.times(), std::move(values), std::move(observed));
}

} // namespace panelkit

#ifndef PANELKIT_PANEL_HPP
#define PANELKIT_PANEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace panelkit {

/// Rectangular unit x time outcome panel with an observation mask.
///
/// Times are consecutive integer periods (annual data). All values are
/// immutable after construction; the type is safe to share across threads.
class Panel {
public:
    /// Empty placeholder so aggregates holding a Panel can be
    /// default-constructed; every accessor assumes a real panel.
    Panel() = default;

    Panel(std::vector<std::string> units, std::vector<int> times,
          std::vector<double> outcomes, std::vector<std::uint8_t> observed);

    /// Fully observed panel.
    Panel(std::vector<std::string> units, std::vector<int> times,
          std::vector<double> outcomes);

    const std::vector<std::string>& units() const { return units_; }
    const std::vector<int>& times() const { return times_; }
    int n_units() const { return static_cast<int>(units_.size()); }
    int n_times() const { return static_cast<int>(times_.size()); }
    int first_time() const { return times_.front(); }
    int last_time() const { return times_.back(); }

    bool contains_time(int t) const { return t >= first_time() && t <= last_time(); }
    int time_index(int t) const; // throws ValidationError if out of range

    /// Index of a unit, or -1 when absent.
    int unit_index(const std::string& unit) const;
    const std::string& unit_name(int u) const { return units_[static_cast<std::size_t>(u)]; }

    double at(int u, int time_idx) const {
        return outcomes_[static_cast<std::size_t>(u) * times_.size() + static_cast<std::size_t>(time_idx)];
    }
    bool observed(int u, int time_idx) const {
        return observed_[static_cast<std::size_t>(u) * times_.size() + static_cast<std::size_t>(time_idx)] != 0;
    }
    double value_in_year(int u, int year) const { return at(u, time_index(year)); }
    bool observed_in_year(int u, int year) const { return observed(u, time_index(year)); }
    bool fully_observed() const;

    /// Copy with the named units removed (used by the inclusion filter).
    Panel without_units(const std::vector<std::string>& drop) const;

private:
    void validate() const;
    void build_lookup();

    std::vector<std::string> units_;
    std::vector<int> times_;
    std::vector<double> outcomes_;        // row-major, n_units x n_times
    std::vector<std::uint8_t> observed_;  // same shape, 1 = observed
    std::unordered_map<std::string, int> unit_lookup_;
};

/// Per-unit policy adoption times. Never-treated units carry std::nullopt
/// rather than a sentinel year.
class TreatmentSchedule {
public:
    TreatmentSchedule() = default;
    explicit TreatmentSchedule(std::map<std::string, std::optional<int>> adoption)
        : adoption_(std::move(adoption)) {}

    void set(const std::string& unit, std::optional<int> time) { adoption_[unit] = time; }
    bool has(const std::string& unit) const { return adoption_.count(unit) > 0; }

    /// Adoption year, or nullopt for never-treated. Throws ValidationError
    /// for units with no entry.
    std::optional<int> at(const std::string& unit) const;

    const std::map<std::string, std::optional<int>>& entries() const { return adoption_; }

    TreatmentSchedule without_units(const std::vector<std::string>& drop) const;

private:
    std::map<std::string, std::optional<int>> adoption_;
};

struct ExclusionRecord {
    std::string unit;
    std::string reason;
    bool dropped_from_panel = false;
};

/// Panel + schedule + study settings, after inclusion/exclusion filtering.
/// treated_units lists the evaluable focal units in panel order.
struct StudyFrame {
    Panel panel;
    TreatmentSchedule schedule;
    int post_horizon = 0;    // effects measured for event times 0..post_horizon
    int min_pre_periods = 1;
    std::vector<std::string> treated_units;
    std::map<std::string, int> pre_period_counts; // observed pre periods per finitely-adopting unit
    std::vector<ExclusionRecord> exclusions;

    bool is_treated(const std::string& unit) const;
    /// Adoption year of a focal unit; throws EstimationError otherwise.
    int adoption_year(const std::string& focal) const;
    /// Focal units grouped by adoption year, ascending.
    std::map<int, std::vector<std::string>> cohorts() const;
};

struct EventWindow {
    int pre_periods = 0;  // event times -pre_periods..-1 are available
    int max_post = 0;     // event times 0..max_post are available
};

enum class OutcomeTransform { Identity, NaturalLog };

/// Applies the inclusion/exclusion rules:
///  - units adopting at or before the first panel period are removed from the
///    panel entirely (they have no pre-period and can never serve as donors);
///  - units with fewer than min_pre_periods observed pre-treatment periods,
///    or with missing cells inside their fit/evaluation window, are excluded
///    as focal units but kept as donor candidates;
///  - units adopting after the panel window are donor candidates only.
/// Throws ValidationError on schedule/panel mismatches and EstimationError
/// when no evaluable treated unit remains.
StudyFrame apply_inclusion_filter(const Panel& panel, const TreatmentSchedule& schedule,
                                  int post_horizon, int min_pre_periods);

/// Donor pool for a focal unit: every other unit whose adoption time is at
/// least post_horizon + 1 periods after the focal adoption (never-treated
/// always qualifies), fully observed over the focal unit's fit and evaluation
/// window. Returned in panel unit order.
std::vector<std::string> donor_set(const StudyFrame& frame, const std::string& focal);

/// Available event times for a focal unit. Late adopters get truncated post
/// windows.
EventWindow event_window(const StudyFrame& frame, const std::string& focal);

/// Elementwise outcome transform; the observation mask is preserved. The log
/// transform requires every observed outcome to be positive and reports all
/// offending cells otherwise.
Panel transform_outcome(const Panel& panel, OutcomeTransform transform);

} // namespace panelkit

#endif

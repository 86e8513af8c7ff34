#ifndef PANELKIT_DIAGNOSTICS_HPP
#define PANELKIT_DIAGNOSTICS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelkit/run.hpp"
#include "panelkit/table.hpp"

namespace panelkit {

struct PretrendEntry {
    double estimate = 0.0;
    std::optional<double> ci_lower;
    std::optional<double> ci_upper;
    bool excludes_zero = false;
};

/// Pre-period slice of an estimate series. Reports how many pre-period
/// intervals exclude zero; it deliberately makes no accept/reject call — a
/// quiet pre-period is not positive evidence that the identifying assumption
/// holds.
struct PretrendReport {
    std::map<int, PretrendEntry> by_event_time;
    int intervals_total = 0;
    int intervals_excluding_zero = 0;
    std::string summary;
};

PretrendReport pretrend_series(const AttResult& att);
PretrendReport pretrend_series(const EffectSeries& series,
                               const std::optional<IntervalSeries>& intervals);

struct PlaceboInTimeResult {
    int shift = 0;                        // years adoption was moved earlier
    double average_placebo_effect = 0.0;  // mean estimate over the fabricated post window
    std::optional<double> ci_lower;
    std::optional<double> ci_upper;
    std::map<int, AttCell> by_event_time; // the fabricated-window series
};

/// Largest admissible placebo shift: one less than the shortest focal
/// pre-period length. limiting_unit names a unit attaining the bound.
struct PlaceboShiftBound {
    int max_shift = 0;
    std::string limiting_unit;
    int limiting_cohort_year = 0;
};

PlaceboShiftBound placebo_shift_bound(const StudyFrame& frame);

/// Re-runs the estimation with every finite adoption time moved `shift` years
/// earlier and the evaluation truncated to the fabricated post window, which
/// ends the period before true adoption. No outcome at or after any unit's
/// true adoption time enters estimation or evaluation. The estimated
/// "effects" should be near zero.
PlaceboInTimeResult placebo_in_time(const StudyFrame& frame, int shift,
                                    const EstimationOptions& options);

/// Placebo run with the rebuilt frame and full estimation output retained,
/// so the no-post-adoption-data property can be audited directly.
struct PlaceboRun {
    StudyFrame frame;
    RunOutput output;
    PlaceboInTimeResult result;
};

PlaceboRun placebo_in_time_run(const StudyFrame& frame, int shift,
                               const EstimationOptions& options);

struct FitFlag {
    std::string entity;
    std::string warning;
};

/// Fit-quality summary per cohort entity plus the pooled aggregate. Flags
/// warn; they never drop units.
struct FitReport {
    struct Entry {
        std::string entity;
        std::optional<double> rmspe;
        int pre_periods = 0;
        bool aggregate = false;
    };
    std::vector<Entry> entries;
    std::vector<FitFlag> flags;
};

struct FitThresholds {
    /// Poor fit when rmspe exceeds this fraction of the target's pre-period
    /// standard deviation. No accepted rule of thumb exists, so the value is
    /// configurable and reported with the flag.
    double poor_fit_sd_fraction = 0.2;
    /// Short pre-period warning threshold.
    int short_pre_periods = 8;
};

FitReport build_fit_report(const RunOutput& output, const FitThresholds& thresholds);

/// Plot-ready export tables. Column schemas are fixed:
///   event_study(entity, event_time, estimate, ci_lower, ci_upper)
///   weights(entity, donor, weight)           (descending weight)
///   fit(entity, rmspe, n_pre, flags)         (aggregate row flagged)
///   counts(event_time, n_contributing)
struct PlotExports {
    Table event_study;
    Table weights;
    Table fit;
    Table counts;
};

PlotExports export_plot_series(const RunOutput& output, const FitReport& fit_report);

} // namespace panelkit

#endif

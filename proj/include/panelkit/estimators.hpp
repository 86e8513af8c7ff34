#ifndef PANELKIT_ESTIMATORS_HPP
#define PANELKIT_ESTIMATORS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelkit/panel.hpp"
#include "panelkit/simplex_solver.hpp"

namespace panelkit {

enum class Estimator { Did, Scm, FeAscm };

std::string estimator_name(Estimator e);
Estimator estimator_from_name(const std::string& name); // throws ValidationError

/// Effect estimates indexed by event time (negative = pre-period placebo
/// values, non-negative = post-period effects).
struct EffectSeries {
    std::string focal;  // unit id or cohort label
    Estimator estimator = Estimator::Did;
    std::map<int, double> by_event_time;
    std::optional<WeightVector> donor_weights;
    /// Root mean squared pre-period gap. Absent when the series has no
    /// informative pre-period entry (a DiD series with a single pre period
    /// stores only the definitional zero at event time -1).
    std::optional<double> rmspe;
};

struct TwoByTwoTable {
    double donor_pre = 0.0;
    double donor_post = 0.0;
    double focal_pre = 0.0;
    double focal_post = 0.0;
    double did_estimate = 0.0;
};

/// Builds the table from four block means; the estimate is
/// (focal_post - focal_pre) - (donor_post - donor_pre).
TwoByTwoTable two_by_two_from_means(double donor_pre, double donor_post,
                                    double focal_pre, double focal_post);

/// Pre/post block means for the focal unit against the uniform donor average.
TwoByTwoTable did_two_by_two(const StudyFrame& frame, const std::string& focal);

/// Event-study DiD: each event time is compared against the last pre-period,
/// with the uniform donor average as comparison. The event time -1 entry is
/// identically zero by construction and stored as exact 0.
EffectSeries did_event_study(const StudyFrame& frame, const std::string& focal);

/// Synthetic-control weights from the pre-period fit. With demean = true the
/// focal and every donor series first have their own pre-period mean removed
/// (the unit-intercept variant), so the fit matches trends rather than
/// levels.
WeightVector scm_fit(const StudyFrame& frame, const std::string& focal, bool demean);

/// Gap series: observed focal outcome minus the weighted donor average, over
/// the full event window. rmspe is computed over the pre-period gaps.
EffectSeries scm_effects(const StudyFrame& frame, const std::string& focal,
                         const WeightVector& weights);

/// Fixed-effects augmented SCM: weights come from the demeaned fit and the
/// effect at each event time is the weighted DiD averaged over all pre
/// periods. Equivalently the demeaned gap series.
EffectSeries fe_ascm_effects(const StudyFrame& frame, const std::string& focal);

/// Same, with externally supplied weights (e.g. uniform weights recover the
/// pre-period-averaged DiD; pooled fits supply cross-cohort weights).
EffectSeries fe_ascm_effects_with_weights(const StudyFrame& frame, const std::string& focal,
                                          const WeightVector& weights);

/// Difference between the raw gap series and the fixed-effects augmented
/// series under the same weights: the estimated level bias removed by the
/// augmentation (constant across event times).
std::map<int, double> fe_ascm_bias(const StudyFrame& frame, const std::string& focal,
                                   const WeightVector& weights);

/// Root mean squared pre-period gap, recomputed from the stored series. The
/// definitional zero at event time -1 of DiD series is excluded. Throws
/// EstimationError when no informative pre-period entry exists.
double rmspe(const EffectSeries& series);

namespace detail {

/// Shared cores used for both single focal units and cohort pseudo-units
/// (the target is the mean over `members` at each period). All members must
/// share the same adoption year.

struct TargetSpec {
    std::vector<std::string> members; // at least one treated unit
    std::string label;                // focal unit id or cohort label
};

EffectSeries did_series(const StudyFrame& frame, const TargetSpec& target);
TwoByTwoTable did_table(const StudyFrame& frame, const TargetSpec& target);
WeightVector scm_fit_core(const StudyFrame& frame, const TargetSpec& target, bool demean);
EffectSeries scm_series(const StudyFrame& frame, const TargetSpec& target,
                        const WeightVector& weights);
EffectSeries fe_series(const StudyFrame& frame, const TargetSpec& target,
                       const WeightVector& weights);

/// Pre-period target and donor dictionary for a (possibly demeaned) fit.
/// Row r corresponds to the period `adoption - 1 - r` (most recent first).
struct FitMatrices {
    std::vector<std::string> donors;
    std::vector<double> target;      // length pre_periods
    std::vector<double> dictionary;  // row-major pre_periods x donors
    int adoption = 0;
    int pre_periods = 0;
    int max_post = 0;
};

FitMatrices build_fit_matrices(const StudyFrame& frame, const TargetSpec& target, bool demean);

/// Mean outcome over members in a calendar year (members must be observed).
double member_mean(const Panel& panel, const std::vector<int>& member_idx, int year);

} // namespace detail

} // namespace panelkit

#endif

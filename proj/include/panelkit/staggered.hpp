#ifndef PANELKIT_STAGGERED_HPP
#define PANELKIT_STAGGERED_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelkit/estimators.hpp"
#include "panelkit/panel.hpp"

namespace panelkit {

enum class CohortFitMode { AverageOfUnits, CohortAverageTarget };

std::string fit_mode_name(CohortFitMode m);
CohortFitMode fit_mode_from_name(const std::string& name);

/// Effect estimate for one treatment-time cohort.
struct CohortEstimate {
    int cohort_year = 0;
    std::vector<std::string> members; // panel order; all share cohort_year
    EffectSeries effect;
    CohortFitMode fit_mode = CohortFitMode::CohortAverageTarget;
};

enum class OutcomeScale { Level, Log };

struct AttCell {
    double estimate = 0.0;
    int contributing_units = 0;
    std::optional<double> ci_lower;
    std::optional<double> ci_upper;
};

/// Overall average effect on treated units by event time, aggregated over
/// cohorts observed at each event time and weighted by cohort size.
struct AttResult {
    std::map<int, AttCell> by_event_time;
    OutcomeScale outcome_scale = OutcomeScale::Level;
};

/// One estimated comparison (a focal unit or cohort pseudo-unit against its
/// weighted donor pool). Retains everything inference needs to decompose the
/// aggregate estimate into per-unit contributions.
struct ComparisonRecord {
    int cohort_year = 0;
    std::vector<std::string> members;
    std::vector<std::string> donors;  // panel order
    std::vector<double> weights;      // aligned with donors
    Estimator estimator = Estimator::Did;
    int pre_periods = 0;
    int max_post = 0;
    bool solver_converged = true;
};

/// A completed estimation run: the frame it ran on, the per-comparison
/// records, cohort estimates, and the aggregated series.
struct EstimationRun {
    StudyFrame frame;
    std::vector<ComparisonRecord> records;
    std::vector<CohortEstimate> cohorts;
    AttResult att;
};

/// Cohort-level estimate. AverageOfUnits averages the members' individual
/// effect series; CohortAverageTarget averages the members' outcomes into one
/// pseudo-unit first and runs the estimator on that (typically a better and
/// less noisy fit).
CohortEstimate cohort_effects(const StudyFrame& frame, int cohort_year,
                              Estimator estimator, CohortFitMode fit_mode);

/// Cohort-size-weighted average across cohorts, per event time, restricted to
/// cohorts whose window covers that event time.
AttResult overall_att(const StudyFrame& frame, const std::vector<CohortEstimate>& cohorts);

struct PartiallyPooledFit {
    std::vector<int> cohort_years;
    std::vector<WeightVector> weights;       // aligned with cohort_years
    double pooling_weight = 0.0;             // nu
    double pooled_objective = 0.0;           // aligned-average squared pre-period gap
    std::vector<double> cohort_objectives;   // per-cohort mean squared pre-period gap
    int aligned_pre_periods = 0;             // shortest pre window across cohorts
    bool converged = true;
    int iterations = 0;
    std::vector<double> objective_trace;     // accepted objective per iteration
};

/// Joint synthetic-control fit across cohorts minimizing
///   nu * (fit of the event-time-aligned, cohort-size-weighted average)
///   + (1 - nu) * (mean of the per-cohort objectives),
/// each cohort's weights constrained to its own donor simplex. The aligned
/// average runs over the shortest pre-period length among the cohorts.
/// nu = 0 reproduces the independent per-cohort fits.
PartiallyPooledFit partially_pooled_fit(const StudyFrame& frame,
                                        const std::vector<int>& cohort_years,
                                        double pooling_weight, bool demean);

/// Cohort estimate built from externally supplied weights (used with the
/// partially pooled fit). estimator must be Scm or FeAscm.
CohortEstimate cohort_estimate_with_weights(const StudyFrame& frame, int cohort_year,
                                            Estimator estimator, const WeightVector& weights);

/// Label used for cohort entities in reports and exports.
std::string cohort_label(int cohort_year);

namespace detail {

/// Cohort build that also returns the comparison records (one per member for
/// AverageOfUnits and DiD, one pseudo-unit record otherwise). Used by the
/// estimation driver.
std::vector<ComparisonRecord> cohort_records(const StudyFrame& frame, int cohort_year,
                                             Estimator estimator, CohortFitMode fit_mode,
                                             const WeightVector* pooled_weights,
                                             CohortEstimate* estimate_out);

} // namespace detail

} // namespace panelkit

#endif

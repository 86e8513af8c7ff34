#ifndef PANELKIT_RUN_HPP
#define PANELKIT_RUN_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panelkit/inference.hpp"
#include "panelkit/staggered.hpp"

namespace panelkit {

/// Settings for one estimation pass over a StudyFrame (no I/O here; file
/// handling lives in the pipeline layer).
struct EstimationOptions {
    Estimator estimator = Estimator::FeAscm;
    CohortFitMode fit_mode = CohortFitMode::CohortAverageTarget;
    /// Pooling weight nu in [0, 1] for the cross-cohort synthetic-control
    /// fit. Ignored for DiD. nu > 0 requires CohortAverageTarget.
    double pooling_weight = 0.5;
    /// Demeaning default follows the estimator: FeAscm fits on residuals,
    /// plain Scm on raw levels. Set to override.
    std::optional<bool> demean;
    /// replicates == 0 disables interval construction entirely.
    BootstrapConfig bootstrap;
    OutcomeScale outcome_scale = OutcomeScale::Level;
    ExecMode exec = ExecMode::Parallel;
    /// Also compute the aggregate series at nu = 0 and nu = 1 so the pooling
    /// choice is reported rather than silent.
    bool pooling_sensitivity = true;

    bool demean_effective() const {
        return demean.value_or(estimator == Estimator::FeAscm);
    }
};

struct RunOutput {
    EstimationRun run;
    std::optional<IntervalSeries> att_ci;
    std::map<std::string, IntervalSeries> cohort_ci; // keyed by cohort label
    std::optional<PartiallyPooledFit> pooled;        // present when nu applied
    /// Aggregate point series at the pooling extremes, when sensitivity
    /// reporting is on: keys "0" and "1".
    std::map<std::string, AttResult> pooling_sensitivity_att;
    std::vector<std::string> warnings;
};

/// Full estimation pass: per-cohort fits (optionally partially pooled),
/// aggregation, and bootstrap intervals. Cohort fits and bootstrap
/// replicates run under options.exec.
RunOutput run_estimation(const StudyFrame& frame, const EstimationOptions& options);

} // namespace panelkit

#endif

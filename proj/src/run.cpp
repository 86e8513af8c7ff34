#include "panelkit/run.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "panelkit/errors.hpp"

namespace panelkit {

namespace {

struct CohortSlot {
    CohortEstimate estimate;
    std::vector<ComparisonRecord> records;
};

AttResult aggregate(const StudyFrame& frame, const std::vector<CohortEstimate>& cohorts,
                    OutcomeScale scale) {
    AttResult att = overall_att(frame, cohorts);
    att.outcome_scale = scale;
    return att;
}

} // namespace

RunOutput run_estimation(const StudyFrame& frame, const EstimationOptions& options) {
    if (!(options.pooling_weight >= 0.0 && options.pooling_weight <= 1.0)) {
        throw ValidationError("pooling weight must lie in [0, 1]");
    }
    const bool synthetic = options.estimator != Estimator::Did;
    const bool pooled_path = synthetic && options.fit_mode == CohortFitMode::CohortAverageTarget;
    if (synthetic && options.pooling_weight > 0.0 &&
        options.fit_mode == CohortFitMode::AverageOfUnits) {
        throw ValidationError("pooled fitting requires fit_mode = cohort_average_target");
    }

    RunOutput out;
    out.run.frame = frame;

    const auto cohort_map = frame.cohorts();
    std::vector<int> years;
    years.reserve(cohort_map.size());
    for (const auto& [year, members] : cohort_map) {
        (void)members;
        years.push_back(year);
    }

    std::vector<CohortSlot> slots(years.size());
    if (pooled_path) {
        // One joint fit across cohorts; the per-cohort series are then built
        // from the returned block weights.
        PartiallyPooledFit pooled = partially_pooled_fit(frame, years, options.pooling_weight,
                                                         options.demean_effective());
        for_each_index(years.size(), options.exec, [&](std::size_t i) {
            slots[i].records = detail::cohort_records(frame, years[i], options.estimator,
                                                      options.fit_mode, &pooled.weights[i],
                                                      &slots[i].estimate);
        });
        if (!pooled.converged) {
            out.warnings.push_back("partially pooled solver did not converge");
        }
        out.pooled = std::move(pooled);
    } else {
        for_each_index(years.size(), options.exec, [&](std::size_t i) {
            slots[i].records = detail::cohort_records(frame, years[i], options.estimator,
                                                      options.fit_mode, nullptr,
                                                      &slots[i].estimate);
        });
    }

    for (auto& slot : slots) {
        out.run.cohorts.push_back(std::move(slot.estimate));
        for (auto& rec : slot.records) out.run.records.push_back(std::move(rec));
    }
    for (const auto& rec : out.run.records) {
        if (!rec.solver_converged) {
            std::ostringstream msg;
            msg << "solver did not converge for "
                << (rec.members.size() == 1 ? rec.members.front() : cohort_label(rec.cohort_year));
            out.warnings.push_back(msg.str());
        }
    }

    out.run.att = aggregate(frame, out.run.cohorts, options.outcome_scale);

    if (options.bootstrap.replicates > 0) {
        std::vector<UnitContribution> contributions = unit_contributions(out.run);
        std::map<int, double> points;
        for (const auto& [k, cell] : out.run.att.by_event_time) points[k] = cell.estimate;
        IntervalSeries ci =
            wild_bootstrap_ci(contributions, points, options.bootstrap, options.exec);
        for (auto& [k, cell] : out.run.att.by_event_time) {
            auto it = ci.by_event_time.find(k);
            if (it != ci.by_event_time.end()) {
                cell.ci_lower = it->second.first;
                cell.ci_upper = it->second.second;
            }
        }
        out.att_ci = std::move(ci);

        // Per-cohort intervals from the same machinery, restricted to each
        // cohort's comparison records.
        for (std::size_t c = 0; c < out.run.cohorts.size(); ++c) {
            const CohortEstimate& cohort = out.run.cohorts[c];
            std::vector<std::size_t> indices;
            for (std::size_t r = 0; r < out.run.records.size(); ++r) {
                if (out.run.records[r].cohort_year == cohort.cohort_year) indices.push_back(r);
            }
            std::map<int, double> cohort_points(cohort.effect.by_event_time.begin(),
                                                cohort.effect.by_event_time.end());
            std::vector<UnitContribution> cohort_contrib =
                unit_contributions_for_records(out.run, indices, cohort_points);
            out.cohort_ci.emplace(cohort_label(cohort.cohort_year),
                                  wild_bootstrap_ci(cohort_contrib, cohort_points,
                                                    options.bootstrap, options.exec));
        }
    }

    if (pooled_path && options.pooling_sensitivity) {
        for (double nu : {0.0, 1.0}) {
            PartiallyPooledFit fit =
                partially_pooled_fit(frame, years, nu, options.demean_effective());
            std::vector<CohortEstimate> cohorts(years.size());
            for_each_index(years.size(), options.exec, [&](std::size_t i) {
                cohorts[i] = cohort_estimate_with_weights(frame, years[i], options.estimator,
                                                          fit.weights[i]);
            });
            out.pooling_sensitivity_att.emplace(nu == 0.0 ? "0" : "1",
                                                aggregate(frame, cohorts, options.outcome_scale));
        }
    }

    return out;
}

} // namespace panelkit

#include "panelkit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "panelkit/errors.hpp"

namespace panelkit {

namespace {

std::string exclusion_summary(int excluding, int total) {
    std::ostringstream s;
    s << excluding << " of " << total << " pre-period intervals exclude 0";
    return s.str();
}

bool interval_excludes_zero(double lo, double hi) { return lo > 0.0 || hi < 0.0; }

} // namespace

PretrendReport pretrend_series(const AttResult& att) {
    PretrendReport report;
    for (const auto& [k, cell] : att.by_event_time) {
        if (k >= 0) continue;
        PretrendEntry entry;
        entry.estimate = cell.estimate;
        entry.ci_lower = cell.ci_lower;
        entry.ci_upper = cell.ci_upper;
        if (cell.ci_lower && cell.ci_upper) {
            ++report.intervals_total;
            entry.excludes_zero = interval_excludes_zero(*cell.ci_lower, *cell.ci_upper);
            if (entry.excludes_zero) ++report.intervals_excluding_zero;
        }
        report.by_event_time.emplace(k, entry);
    }
    report.summary = exclusion_summary(report.intervals_excluding_zero, report.intervals_total);
    return report;
}

PretrendReport pretrend_series(const EffectSeries& series,
                               const std::optional<IntervalSeries>& intervals) {
    PretrendReport report;
    for (const auto& [k, estimate] : series.by_event_time) {
        if (k >= 0) continue;
        PretrendEntry entry;
        entry.estimate = estimate;
        if (intervals) {
            auto it = intervals->by_event_time.find(k);
            if (it != intervals->by_event_time.end()) {
                entry.ci_lower = it->second.first;
                entry.ci_upper = it->second.second;
                ++report.intervals_total;
                entry.excludes_zero = interval_excludes_zero(it->second.first, it->second.second);
                if (entry.excludes_zero) ++report.intervals_excluding_zero;
            }
        }
        report.by_event_time.emplace(k, entry);
    }
    report.summary = exclusion_summary(report.intervals_excluding_zero, report.intervals_total);
    return report;
}

PlaceboShiftBound placebo_shift_bound(const StudyFrame& frame) {
    PlaceboShiftBound bound;
    bool first = true;
    for (const auto& unit : frame.treated_units) {
        const int pre = event_window(frame, unit).pre_periods;
        if (first || pre - 1 < bound.max_shift) {
            bound.max_shift = pre - 1;
            bound.limiting_unit = unit;
            bound.limiting_cohort_year = frame.adoption_year(unit);
            first = false;
        }
    }
    return bound;
}

PlaceboRun placebo_in_time_run(const StudyFrame& frame, int shift,
                               const EstimationOptions& options) {
    const PlaceboShiftBound bound = placebo_shift_bound(frame);
    if (shift < 1) throw ValidationError("placebo shift must be at least 1");
    if (shift > bound.max_shift) {
        std::ostringstream msg;
        msg << "placebo shift " << shift << " exceeds the maximum " << bound.max_shift
            << ": the " << bound.limiting_cohort_year << " cohort (" << bound.limiting_unit
            << ") has only " << bound.max_shift + 1 << " pre-treatment periods";
        throw ValidationError(msg.str());
    }

    // Every finite adoption time moves earlier by the shift; the fabricated
    // post window then ends the period before true adoption, so no genuinely
    // treated outcome enters the placebo run.
    TreatmentSchedule shifted;
    for (const auto& [unit, time] : frame.schedule.entries()) {
        shifted.set(unit, time ? std::optional<int>(*time - shift) : std::nullopt);
    }

    StudyFrame rebuilt = apply_inclusion_filter(frame.panel, shifted,
                                                /*post_horizon=*/shift - 1,
                                                /*min_pre_periods=*/1);
    // Evaluate exactly the focal units of the real analysis; units that only
    // become eligible under the shifted clock are left as donors.
    std::vector<std::string> focal;
    for (const auto& unit : rebuilt.treated_units) {
        if (frame.is_treated(unit)) focal.push_back(unit);
    }
    rebuilt.treated_units = std::move(focal);
    if (rebuilt.treated_units.empty()) {
        throw EstimationError("no focal units remain under the placebo shift");
    }

    EstimationOptions placebo_options = options;
    placebo_options.pooling_sensitivity = false;

    RunOutput estimated = run_estimation(rebuilt, placebo_options);
    PlaceboRun out{std::move(rebuilt), std::move(estimated), {}};

    PlaceboInTimeResult& result = out.result;
    result.shift = shift;
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k <= shift - 1; ++k) {
        const AttCell& cell = out.output.run.att.by_event_time.at(k);
        result.by_event_time.emplace(k, cell);
        sum += cell.estimate;
        ++count;
    }
    result.average_placebo_effect = sum / static_cast<double>(count);

    if (placebo_options.bootstrap.replicates > 0) {
        // Collapse the per-event-time contributions to their window mean;
        // every comparison covers the whole fabricated window, so the mean of
        // the collapsed contributions is the averaged estimate.
        std::vector<UnitContribution> per_k = unit_contributions(out.output.run);
        std::vector<UnitContribution> collapsed;
        for (const auto& c : per_k) {
            double total = 0.0;
            int n = 0;
            for (int k = 0; k <= shift - 1; ++k) {
                auto it = c.per_event_time.find(k);
                if (it == c.per_event_time.end()) break;
                total += it->second;
                ++n;
            }
            if (n != shift) continue;
            UnitContribution flat;
            flat.unit = c.unit;
            flat.per_event_time[0] = total / static_cast<double>(n);
            collapsed.push_back(std::move(flat));
        }
        std::map<int, double> point{{0, result.average_placebo_effect}};
        IntervalSeries ci = wild_bootstrap_ci(collapsed, point, placebo_options.bootstrap,
                                              placebo_options.exec);
        result.ci_lower = ci.by_event_time.at(0).first;
        result.ci_upper = ci.by_event_time.at(0).second;
    }
    return out;
}

PlaceboInTimeResult placebo_in_time(const StudyFrame& frame, int shift,
                                    const EstimationOptions& options) {
    return placebo_in_time_run(frame, shift, options).result;
}

namespace {

double target_pre_sd(const StudyFrame& frame, const std::vector<std::string>& members) {
    std::vector<int> idx;
    for (const auto& m : members) idx.push_back(frame.panel.unit_index(m));
    const int adoption = frame.adoption_year(members.front());
    const int first = frame.panel.first_time();
    std::vector<double> series;
    for (int t = first; t < adoption; ++t) {
        series.push_back(detail::member_mean(frame.panel, idx, t));
    }
    const double n = static_cast<double>(series.size());
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
    double var = 0.0;
    for (double v : series) var += (v - mean) * (v - mean);
    return std::sqrt(var / n);
}

} // namespace

FitReport build_fit_report(const RunOutput& output, const FitThresholds& thresholds) {
    FitReport report;
    const StudyFrame& frame = output.run.frame;

    for (const auto& cohort : output.run.cohorts) {
        FitReport::Entry entry;
        entry.entity = cohort_label(cohort.cohort_year);
        entry.rmspe = cohort.effect.rmspe;
        entry.pre_periods = event_window(frame, cohort.members.front()).pre_periods;
        report.entries.push_back(entry);

        if (entry.pre_periods < thresholds.short_pre_periods) {
            std::ostringstream w;
            w << "short pre-period: " << entry.pre_periods << " periods (threshold "
              << thresholds.short_pre_periods << ")";
            report.flags.push_back({entry.entity, w.str()});
        }
        if (entry.rmspe) {
            const double sd = target_pre_sd(frame, cohort.members);
            if (sd > 0.0 && *entry.rmspe > thresholds.poor_fit_sd_fraction * sd) {
                std::ostringstream w;
                w << "poor pre-period fit: RMSPE " << *entry.rmspe << " exceeds "
                  << thresholds.poor_fit_sd_fraction * 100.0 << "% of the pre-period SD " << sd;
                report.flags.push_back({entry.entity, w.str()});
            }
        }
    }

    for (const auto& rec : output.run.records) {
        if (rec.solver_converged) continue;
        const std::string entity =
            rec.members.size() == 1 ? rec.members.front() : cohort_label(rec.cohort_year);
        report.flags.push_back({entity, "solver did not converge"});
    }

    if (output.pooled) {
        FitReport::Entry entry;
        entry.entity = "pooled_average";
        entry.rmspe = std::sqrt(output.pooled->pooled_objective);
        entry.pre_periods = output.pooled->aligned_pre_periods;
        entry.aggregate = true;
        report.entries.push_back(entry);
        if (!output.pooled->converged) {
            report.flags.push_back({"pooled_average", "solver did not converge"});
        }
    }
    return report;
}

namespace {

void push_series_rows(Table& table, const std::string& entity,
                      const std::map<int, double>& series, const IntervalSeries* intervals) {
    for (const auto& [k, estimate] : series) {
        std::string lo, hi;
        if (intervals) {
            auto it = intervals->by_event_time.find(k);
            if (it != intervals->by_event_time.end()) {
                lo = format_value(it->second.first);
                hi = format_value(it->second.second);
            }
        }
        table.rows.push_back({entity, std::to_string(k), format_value(estimate), lo, hi});
    }
}

} // namespace

PlotExports export_plot_series(const RunOutput& output, const FitReport& fit_report) {
    PlotExports out;

    out.event_study.columns = {"entity", "event_time", "estimate", "ci_lower", "ci_upper"};
    {
        std::map<int, double> att_points;
        IntervalSeries att_ci;
        for (const auto& [k, cell] : output.run.att.by_event_time) {
            att_points[k] = cell.estimate;
            if (cell.ci_lower && cell.ci_upper) {
                att_ci.by_event_time.emplace(k, std::make_pair(*cell.ci_lower, *cell.ci_upper));
            }
        }
        push_series_rows(out.event_study, "overall", att_points,
                         output.att_ci ? &att_ci : nullptr);
    }
    for (const auto& cohort : output.run.cohorts) {
        const std::string label = cohort_label(cohort.cohort_year);
        auto ci = output.cohort_ci.find(label);
        push_series_rows(out.event_study, label, cohort.effect.by_event_time,
                         ci == output.cohort_ci.end() ? nullptr : &ci->second);
    }
    for (const auto& [nu, att] : output.pooling_sensitivity_att) {
        std::map<int, double> points;
        for (const auto& [k, cell] : att.by_event_time) points[k] = cell.estimate;
        push_series_rows(out.event_study, "overall_nu" + nu, points, nullptr);
    }

    out.weights.columns = {"entity", "donor", "weight"};
    for (const auto& rec : output.run.records) {
        const std::string entity =
            rec.members.size() == 1 ? rec.members.front() : cohort_label(rec.cohort_year);
        std::vector<std::size_t> order(rec.donors.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return rec.weights[a] > rec.weights[b];
        });
        for (std::size_t i : order) {
            out.weights.rows.push_back({entity, rec.donors[i], format_value(rec.weights[i])});
        }
    }

    out.fit.columns = {"entity", "rmspe", "n_pre", "flags"};
    for (const auto& entry : fit_report.entries) {
        std::string flags;
        if (entry.aggregate) flags = "aggregate";
        for (const auto& flag : fit_report.flags) {
            if (flag.entity != entry.entity) continue;
            if (!flags.empty()) flags += "; ";
            flags += flag.warning;
        }
        out.fit.rows.push_back({entry.entity,
                                entry.rmspe ? format_value(*entry.rmspe) : std::string(),
                                std::to_string(entry.pre_periods), flags});
    }

    out.counts.columns = {"event_time", "n_contributing"};
    for (const auto& [k, cell] : output.run.att.by_event_time) {
        out.counts.rows.push_back({std::to_string(k), std::to_string(cell.contributing_units)});
    }

    return out;
}

} // namespace panelkit

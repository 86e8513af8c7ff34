#include "panelkit/staggered.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "panelkit/errors.hpp"

namespace panelkit {

std::string fit_mode_name(CohortFitMode m) {
    return m == CohortFitMode::AverageOfUnits ? "average_of_units" : "cohort_average_target";
}

CohortFitMode fit_mode_from_name(const std::string& name) {
    if (name == "average_of_units") return CohortFitMode::AverageOfUnits;
    if (name == "cohort_average_target") return CohortFitMode::CohortAverageTarget;
    throw ValidationError("unknown fit mode '" + name +
                          "' (expected average_of_units or cohort_average_target)");
}

std::string cohort_label(int cohort_year) {
    return "cohort_" + std::to_string(cohort_year);
}

namespace {

std::vector<std::string> cohort_members(const StudyFrame& frame, int cohort_year) {
    auto cohorts = frame.cohorts();
    auto it = cohorts.find(cohort_year);
    if (it == cohorts.end() || it->second.empty()) {
        throw EstimationError("no treated units adopt in year " + std::to_string(cohort_year));
    }
    return it->second;
}

std::optional<double> recompute_rmspe(const EffectSeries& series) {
    double sum_sq = 0.0;
    int n = 0;
    for (const auto& [k, v] : series.by_event_time) {
        if (k >= 0) continue;
        if (series.estimator == Estimator::Did && k == -1) continue;
        sum_sq += v * v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return std::sqrt(sum_sq / static_cast<double>(n));
}

EffectSeries average_series(std::vector<EffectSeries> parts, const std::string& label) {
    EffectSeries out;
    out.focal = label;
    out.estimator = parts.front().estimator;
    const double n = static_cast<double>(parts.size());
    for (const auto& [k, v] : parts.front().by_event_time) {
        (void)v;
        double sum = 0.0;
        for (const auto& p : parts) sum += p.by_event_time.at(k);
        out.by_event_time[k] = sum / n;
    }
    out.rmspe = recompute_rmspe(out);
    return out;
}

struct CohortBuild {
    CohortEstimate estimate;
    std::vector<ComparisonRecord> records;
};

ComparisonRecord make_record(const StudyFrame& frame, int cohort_year,
                             const std::vector<std::string>& members, Estimator estimator,
                             const WeightVector& weights, bool converged_known_elsewhere) {
    ComparisonRecord rec;
    rec.cohort_year = cohort_year;
    rec.members = members;
    rec.donors = donor_set(frame, members.front());
    rec.weights.reserve(rec.donors.size());
    for (const auto& d : rec.donors) rec.weights.push_back(weights.at(d));
    rec.estimator = estimator;
    EventWindow w = event_window(frame, members.front());
    rec.pre_periods = w.pre_periods;
    rec.max_post = w.max_post;
    // When the weights come from the joint pooled solve, convergence is
    // reported once for that solve rather than per cohort.
    rec.solver_converged = converged_known_elsewhere ? true : weights.converged;
    return rec;
}

CohortBuild build_cohort(const StudyFrame& frame, int cohort_year, Estimator estimator,
                         CohortFitMode fit_mode, const WeightVector* pooled_weights) {
    const std::vector<std::string> members = cohort_members(frame, cohort_year);
    const std::string label = cohort_label(cohort_year);

    CohortBuild out;
    out.estimate.cohort_year = cohort_year;
    out.estimate.members = members;
    out.estimate.fit_mode = fit_mode;

    if (estimator == Estimator::Did) {
        // DiD is linear in the focal series, so both fit modes coincide; the
        // per-member decomposition keeps inference bookkeeping uniform.
        std::vector<EffectSeries> parts;
        for (const auto& m : members) {
            detail::TargetSpec spec{{m}, m};
            EffectSeries series = detail::did_series(frame, spec);
            out.records.push_back(
                make_record(frame, cohort_year, {m}, estimator, *series.donor_weights, false));
            parts.push_back(std::move(series));
        }
        out.estimate.effect = average_series(std::move(parts), label);
        return out;
    }

    const bool demean = estimator == Estimator::FeAscm;
    if (fit_mode == CohortFitMode::AverageOfUnits) {
        std::vector<EffectSeries> parts;
        for (const auto& m : members) {
            detail::TargetSpec spec{{m}, m};
            WeightVector w = detail::scm_fit_core(frame, spec, demean);
            EffectSeries series = estimator == Estimator::Scm
                                      ? detail::scm_series(frame, spec, w)
                                      : detail::fe_series(frame, spec, w);
            out.records.push_back(make_record(frame, cohort_year, {m}, estimator, w, false));
            parts.push_back(std::move(series));
        }
        out.estimate.effect = average_series(std::move(parts), label);
        return out;
    }

    detail::TargetSpec spec{members, label};
    WeightVector weights;
    bool pooled = pooled_weights != nullptr;
    if (pooled) {
        weights = *pooled_weights;
    } else {
        weights = detail::scm_fit_core(frame, spec, demean);
    }
    EffectSeries series = estimator == Estimator::Scm ? detail::scm_series(frame, spec, weights)
                                                      : detail::fe_series(frame, spec, weights);
    out.records.push_back(make_record(frame, cohort_year, members, estimator, weights, pooled));
    out.estimate.effect = std::move(series);
    return out;
}

} // namespace

CohortEstimate cohort_effects(const StudyFrame& frame, int cohort_year, Estimator estimator,
                              CohortFitMode fit_mode) {
    return build_cohort(frame, cohort_year, estimator, fit_mode, nullptr).estimate;
}

CohortEstimate cohort_estimate_with_weights(const StudyFrame& frame, int cohort_year,
                                            Estimator estimator, const WeightVector& weights) {
    if (estimator == Estimator::Did) {
        throw EstimationError("externally supplied weights require scm or fe_ascm");
    }
    return build_cohort(frame, cohort_year, estimator, CohortFitMode::CohortAverageTarget, &weights)
        .estimate;
}

namespace detail {

std::vector<ComparisonRecord> cohort_records(const StudyFrame& frame, int cohort_year,
                                             Estimator estimator, CohortFitMode fit_mode,
                                             const WeightVector* pooled_weights,
                                             CohortEstimate* estimate_out) {
    CohortBuild b = build_cohort(frame, cohort_year, estimator, fit_mode, pooled_weights);
    if (estimate_out) *estimate_out = std::move(b.estimate);
    return std::move(b.records);
}

} // namespace detail

AttResult overall_att(const StudyFrame& frame, const std::vector<CohortEstimate>& cohorts) {
    if (cohorts.empty()) throw EstimationError("no cohort estimates to aggregate");

    std::set<std::string> seen;
    std::size_t total_members = 0;
    for (const auto& c : cohorts) {
        for (const auto& m : c.members) {
            if (!seen.insert(m).second) {
                throw EstimationError("cohorts overlap on unit " + m);
            }
        }
        total_members += c.members.size();
    }
    if (seen.size() != frame.treated_units.size() || total_members != frame.treated_units.size()) {
        throw EstimationError("cohort estimates must cover every evaluable treated unit");
    }

    std::set<int> event_times;
    for (const auto& c : cohorts) {
        for (const auto& [k, v] : c.effect.by_event_time) {
            (void)v;
            event_times.insert(k);
        }
    }

    AttResult out;
    for (int k : event_times) {
        double weighted_sum = 0.0;
        int contributing = 0;
        for (const auto& c : cohorts) {
            auto it = c.effect.by_event_time.find(k);
            if (it == c.effect.by_event_time.end()) continue;
            const int n_s = static_cast<int>(c.members.size());
            weighted_sum += static_cast<double>(n_s) * it->second;
            contributing += n_s;
        }
        if (contributing == 0) continue;
        AttCell cell;
        cell.estimate = weighted_sum / static_cast<double>(contributing);
        cell.contributing_units = contributing;
        out.by_event_time.emplace(k, cell);
    }
    return out;
}

namespace {

struct PooledContext {
    std::vector<detail::FitMatrices> fits;
    std::vector<double> omega; // cohort-size shares
    double nu = 0.0;
    std::size_t aligned_rows = 0;
    double separate_scale = 0.0; // 1 / number of cohorts
};

double pooled_term(const PooledContext& ctx, const std::vector<double>& w,
                   const std::vector<std::size_t>& offsets) {
    double total = 0.0;
    for (std::size_t r = 0; r < ctx.aligned_rows; ++r) {
        double gap = 0.0;
        for (std::size_t s = 0; s < ctx.fits.size(); ++s) {
            const auto& fit = ctx.fits[s];
            const std::size_t n_d = fit.donors.size();
            double synthetic = 0.0;
            for (std::size_t d = 0; d < n_d; ++d) {
                synthetic += fit.dictionary[r * n_d + d] * w[offsets[s] + d];
            }
            gap += ctx.omega[s] * (fit.target[r] - synthetic);
        }
        total += gap * gap;
    }
    return total / static_cast<double>(ctx.aligned_rows);
}

double separate_term(const PooledContext& ctx, const std::vector<double>& w,
                     const std::vector<std::size_t>& offsets, std::size_t s) {
    const auto& fit = ctx.fits[s];
    const std::size_t n_d = fit.donors.size();
    const std::size_t rows = fit.target.size();
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double synthetic = 0.0;
        for (std::size_t d = 0; d < n_d; ++d) {
            synthetic += fit.dictionary[r * n_d + d] * w[offsets[s] + d];
        }
        const double gap = fit.target[r] - synthetic;
        total += gap * gap;
    }
    return total / static_cast<double>(rows);
}

struct PooledModelState {
    PooledContext ctx;
    std::vector<std::size_t> offsets;
};

double pooled_objective(const void* ptr, const std::vector<double>& w) {
    const auto& st = *static_cast<const PooledModelState*>(ptr);
    double obj = 0.0;
    if (st.ctx.nu > 0.0) obj += st.ctx.nu * pooled_term(st.ctx, w, st.offsets);
    if (st.ctx.nu < 1.0) {
        double sep = 0.0;
        for (std::size_t s = 0; s < st.ctx.fits.size(); ++s) {
            sep += separate_term(st.ctx, w, st.offsets, s);
        }
        obj += (1.0 - st.ctx.nu) * st.ctx.separate_scale * sep;
    }
    return obj;
}

void pooled_gradient(const void* ptr, const std::vector<double>& w, std::vector<double>& g) {
    const auto& st = *static_cast<const PooledModelState*>(ptr);
    const auto& ctx = st.ctx;
    std::fill(g.begin(), g.end(), 0.0);

    if (ctx.nu > 0.0) {
        const double scale = ctx.nu * 2.0 / static_cast<double>(ctx.aligned_rows);
        for (std::size_t r = 0; r < ctx.aligned_rows; ++r) {
            double gap = 0.0;
            for (std::size_t s = 0; s < ctx.fits.size(); ++s) {
                const auto& fit = ctx.fits[s];
                const std::size_t n_d = fit.donors.size();
                double synthetic = 0.0;
                for (std::size_t d = 0; d < n_d; ++d) {
                    synthetic += fit.dictionary[r * n_d + d] * w[st.offsets[s] + d];
                }
                gap += ctx.omega[s] * (fit.target[r] - synthetic);
            }
            for (std::size_t s = 0; s < ctx.fits.size(); ++s) {
                const auto& fit = ctx.fits[s];
                const std::size_t n_d = fit.donors.size();
                const double coeff = -scale * gap * ctx.omega[s];
                for (std::size_t d = 0; d < n_d; ++d) {
                    g[st.offsets[s] + d] += coeff * fit.dictionary[r * n_d + d];
                }
            }
        }
    }

    if (ctx.nu < 1.0) {
        for (std::size_t s = 0; s < ctx.fits.size(); ++s) {
            const auto& fit = ctx.fits[s];
            const std::size_t n_d = fit.donors.size();
            const std::size_t rows = fit.target.size();
            const double scale =
                (1.0 - ctx.nu) * ctx.separate_scale * 2.0 / static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                double synthetic = 0.0;
                for (std::size_t d = 0; d < n_d; ++d) {
                    synthetic += fit.dictionary[r * n_d + d] * w[st.offsets[s] + d];
                }
                const double coeff = -scale * (fit.target[r] - synthetic);
                for (std::size_t d = 0; d < n_d; ++d) {
                    g[st.offsets[s] + d] += coeff * fit.dictionary[r * n_d + d];
                }
            }
        }
    }
}

} // namespace

PartiallyPooledFit partially_pooled_fit(const StudyFrame& frame,
                                        const std::vector<int>& cohort_years,
                                        double pooling_weight, bool demean) {
    if (cohort_years.empty()) throw EstimationError("no cohorts supplied for the pooled fit");
    if (!(pooling_weight >= 0.0 && pooling_weight <= 1.0)) {
        throw ValidationError("pooling weight must lie in [0, 1]");
    }

    PooledModelState state;
    state.ctx.nu = pooling_weight;
    std::vector<std::vector<std::string>> members_per_cohort;
    std::size_t total_members = 0;
    for (int year : cohort_years) {
        std::vector<std::string> members = cohort_members(frame, year);
        detail::TargetSpec spec{members, cohort_label(year)};
        detail::FitMatrices fit = detail::build_fit_matrices(frame, spec, demean);
        // Center each row by its target value: identical objective on the
        // simplex, and common levels drop out of the optimization.
        const std::size_t n_d = fit.donors.size();
        for (std::size_t r = 0; r < fit.target.size(); ++r) {
            for (std::size_t d = 0; d < n_d; ++d) fit.dictionary[r * n_d + d] -= fit.target[r];
            fit.target[r] = 0.0;
        }
        state.ctx.fits.push_back(std::move(fit));
        total_members += members.size();
        members_per_cohort.push_back(std::move(members));
    }

    // Rescale all cohorts by one common factor so the solve runs at unit
    // scale; objectives are mapped back afterwards.
    double sum_sq = 0.0;
    std::size_t n_entries = 0;
    for (const auto& fit : state.ctx.fits) {
        for (double v : fit.dictionary) sum_sq += v * v;
        n_entries += fit.dictionary.size();
    }
    const double data_scale =
        n_entries > 0 ? std::sqrt(sum_sq / static_cast<double>(n_entries)) : 1.0;
    const double inv_scale = data_scale > 0.0 ? 1.0 / data_scale : 1.0;
    for (auto& fit : state.ctx.fits) {
        for (double& v : fit.dictionary) v *= inv_scale;
    }
    for (const auto& m : members_per_cohort) {
        state.ctx.omega.push_back(static_cast<double>(m.size()) /
                                  static_cast<double>(total_members));
    }
    state.ctx.separate_scale = 1.0 / static_cast<double>(cohort_years.size());

    std::size_t aligned = state.ctx.fits.front().target.size();
    for (const auto& fit : state.ctx.fits) aligned = std::min(aligned, fit.target.size());
    state.ctx.aligned_rows = aligned;

    std::vector<std::pair<std::size_t, std::size_t>> blocks;
    std::size_t offset = 0;
    for (const auto& fit : state.ctx.fits) {
        state.offsets.push_back(offset);
        blocks.emplace_back(offset, fit.donors.size());
        offset += fit.donors.size();
    }

    std::vector<double> w0(offset, 0.0);
    for (std::size_t s = 0; s < state.ctx.fits.size(); ++s) {
        const std::size_t n_d = state.ctx.fits[s].donors.size();
        for (std::size_t d = 0; d < n_d; ++d) {
            w0[state.offsets[s] + d] = 1.0 / static_cast<double>(n_d);
        }
    }

    // Trace-based Lipschitz bound of the combined quadratic.
    double trace = 0.0;
    for (std::size_t s = 0; s < state.ctx.fits.size(); ++s) {
        const auto& fit = state.ctx.fits[s];
        const std::size_t n_d = fit.donors.size();
        const std::size_t rows = fit.target.size();
        double frob_all = 0.0, frob_aligned = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t d = 0; d < n_d; ++d) {
                const double v = fit.dictionary[r * n_d + d];
                frob_all += v * v;
                if (r < aligned) frob_aligned += v * v;
            }
        }
        trace += pooling_weight * (2.0 / static_cast<double>(aligned)) * state.ctx.omega[s] *
                 state.ctx.omega[s] * frob_aligned;
        trace += (1.0 - pooling_weight) * state.ctx.separate_scale *
                 (2.0 / static_cast<double>(rows)) * frob_all;
    }

    detail::BlockQuadratic model;
    model.objective = &pooled_objective;
    model.gradient = &pooled_gradient;
    model.ctx = &state;
    model.lipschitz_bound = std::max(trace, 1e-12);

    detail::PgdResult res = detail::accelerated_pgd(model, std::move(w0), blocks, 1e-10, 100000);

    PartiallyPooledFit out;
    out.cohort_years = cohort_years;
    out.pooling_weight = pooling_weight;
    out.aligned_pre_periods = static_cast<int>(aligned);
    out.converged = res.converged;
    out.iterations = res.iterations;
    out.objective_trace = std::move(res.objective_trace);
    // Objectives are quadratic in the data, so the unit-scale values map back
    // through the squared scale factor.
    const double scale_sq = data_scale > 0.0 ? data_scale * data_scale : 1.0;
    out.pooled_objective = pooled_term(state.ctx, res.w, state.offsets) * scale_sq;
    for (std::size_t s = 0; s < state.ctx.fits.size(); ++s) {
        const auto& fit = state.ctx.fits[s];
        WeightVector wv;
        for (std::size_t d = 0; d < fit.donors.size(); ++d) {
            wv.weights.emplace(fit.donors[d], res.w[state.offsets[s] + d]);
        }
        wv.objective_value = separate_term(state.ctx, res.w, state.offsets, s) * scale_sq;
        wv.iterations_used = res.iterations;
        wv.converged = res.converged;
        out.cohort_objectives.push_back(wv.objective_value);
        out.weights.push_back(std::move(wv));
    }
    return out;
}

} // namespace panelkit

#include "panelkit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "panelkit/errors.hpp"

namespace panelkit {

std::string estimator_name(Estimator e) {
    switch (e) {
        case Estimator::Did: return "did";
        case Estimator::Scm: return "scm";
        case Estimator::FeAscm: return "fe_ascm";
    }
    return "did";
}

Estimator estimator_from_name(const std::string& name) {
    if (name == "did") return Estimator::Did;
    if (name == "scm") return Estimator::Scm;
    if (name == "fe_ascm") return Estimator::FeAscm;
    throw ValidationError("unknown estimator '" + name + "' (expected did, scm or fe_ascm)");
}

namespace detail {

namespace {

struct TargetContext {
    std::vector<int> member_idx;
    int adoption = 0;
    EventWindow window;
    std::vector<std::string> donors;
    std::vector<int> donor_idx;
};

TargetContext resolve_target(const StudyFrame& frame, const TargetSpec& target) {
    if (target.members.empty()) {
        throw EstimationError("estimation target has no member units");
    }
    TargetContext ctx;
    ctx.adoption = frame.adoption_year(target.members.front());
    for (const auto& member : target.members) {
        if (frame.adoption_year(member) != ctx.adoption) {
            throw EstimationError("target members must share one adoption year (cohort " +
                                  target.members.front() + " vs " + member + ")");
        }
        ctx.member_idx.push_back(frame.panel.unit_index(member));
    }
    ctx.window = event_window(frame, target.members.front());
    ctx.donors = donor_set(frame, target.members.front());
    for (const auto& d : ctx.donors) ctx.donor_idx.push_back(frame.panel.unit_index(d));
    return ctx;
}

double donor_mean(const Panel& panel, const std::vector<int>& donor_idx, int year) {
    double sum = 0.0;
    for (int u : donor_idx) sum += panel.value_in_year(u, year);
    return sum / static_cast<double>(donor_idx.size());
}

std::optional<double> pre_period_rmspe(const std::map<int, double>& series, bool skip_minus_one) {
    double sum_sq = 0.0;
    int n = 0;
    for (const auto& [k, v] : series) {
        if (k >= 0) continue;
        if (skip_minus_one && k == -1) continue;
        sum_sq += v * v;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return std::sqrt(sum_sq / static_cast<double>(n));
}

} // namespace

double member_mean(const Panel& panel, const std::vector<int>& member_idx, int year) {
    double sum = 0.0;
    for (int u : member_idx) sum += panel.value_in_year(u, year);
    return sum / static_cast<double>(member_idx.size());
}

TwoByTwoTable did_table(const StudyFrame& frame, const TargetSpec& target) {
    const TargetContext ctx = resolve_target(frame, target);
    const Panel& panel = frame.panel;
    const int pre_start = ctx.adoption - ctx.window.pre_periods;
    const int post_end = ctx.adoption + ctx.window.max_post;

    double focal_pre = 0.0, focal_post = 0.0, donor_pre = 0.0, donor_post = 0.0;
    for (int t = pre_start; t < ctx.adoption; ++t) {
        focal_pre += member_mean(panel, ctx.member_idx, t);
        donor_pre += donor_mean(panel, ctx.donor_idx, t);
    }
    for (int t = ctx.adoption; t <= post_end; ++t) {
        focal_post += member_mean(panel, ctx.member_idx, t);
        donor_post += donor_mean(panel, ctx.donor_idx, t);
    }
    const double n_pre = static_cast<double>(ctx.window.pre_periods);
    const double n_post = static_cast<double>(ctx.window.max_post + 1);
    return two_by_two_from_means(donor_pre / n_pre, donor_post / n_post, focal_pre / n_pre,
                                 focal_post / n_post);
}

EffectSeries did_series(const StudyFrame& frame, const TargetSpec& target) {
    const TargetContext ctx = resolve_target(frame, target);
    const Panel& panel = frame.panel;
    const int reference = ctx.adoption - 1;

    const double focal_ref = member_mean(panel, ctx.member_idx, reference);
    const double donor_ref = donor_mean(panel, ctx.donor_idx, reference);

    EffectSeries series;
    series.focal = target.label;
    series.estimator = Estimator::Did;
    for (int k = -ctx.window.pre_periods; k <= ctx.window.max_post; ++k) {
        if (k == -1) {
            series.by_event_time[k] = 0.0; // definitional: same period as the reference
            continue;
        }
        const int year = ctx.adoption + k;
        const double focal_change = member_mean(panel, ctx.member_idx, year) - focal_ref;
        const double donor_change = donor_mean(panel, ctx.donor_idx, year) - donor_ref;
        series.by_event_time[k] = focal_change - donor_change;
    }

    WeightVector uniform;
    const double w = 1.0 / static_cast<double>(ctx.donors.size());
    for (const auto& d : ctx.donors) uniform.weights.emplace(d, w);
    uniform.objective_value = 0.0;
    series.donor_weights = std::move(uniform);
    series.rmspe = pre_period_rmspe(series.by_event_time, /*skip_minus_one=*/true);
    return series;
}

FitMatrices build_fit_matrices(const StudyFrame& frame, const TargetSpec& target, bool demean) {
    const TargetContext ctx = resolve_target(frame, target);
    const Panel& panel = frame.panel;
    const int L = ctx.window.pre_periods;
    const std::size_t n_donors = ctx.donors.size();

    FitMatrices out;
    out.donors = ctx.donors;
    out.adoption = ctx.adoption;
    out.pre_periods = L;
    out.max_post = ctx.window.max_post;
    out.target.resize(static_cast<std::size_t>(L));
    out.dictionary.resize(static_cast<std::size_t>(L) * n_donors);

    for (int r = 0; r < L; ++r) {
        const int year = ctx.adoption - 1 - r; // most recent pre period first
        out.target[static_cast<std::size_t>(r)] = member_mean(panel, ctx.member_idx, year);
        for (std::size_t d = 0; d < n_donors; ++d) {
            out.dictionary[static_cast<std::size_t>(r) * n_donors + d] =
                panel.value_in_year(ctx.donor_idx[d], year);
        }
    }

    if (demean) {
        // Removing each series' own pre-period mean is algebraically the same
        // as differencing every donor against the target first and demeaning
        // the difference columns; computing it that way cancels any common
        // per-period level in the data itself, before rounding can smear it.
        for (int r = 0; r < L; ++r) {
            for (std::size_t d = 0; d < n_donors; ++d) {
                out.dictionary[static_cast<std::size_t>(r) * n_donors + d] -=
                    out.target[static_cast<std::size_t>(r)];
            }
        }
        for (std::size_t d = 0; d < n_donors; ++d) {
            double col_mean = 0.0;
            for (int r = 0; r < L; ++r) {
                col_mean += out.dictionary[static_cast<std::size_t>(r) * n_donors + d];
            }
            col_mean /= static_cast<double>(L);
            for (int r = 0; r < L; ++r) {
                out.dictionary[static_cast<std::size_t>(r) * n_donors + d] -= col_mean;
            }
        }
        for (auto& v : out.target) v = 0.0;
    }
    return out;
}

WeightVector scm_fit_core(const StudyFrame& frame, const TargetSpec& target, bool demean) {
    FitMatrices fit = build_fit_matrices(frame, target, demean);
    SimplexLsProblem problem;
    problem.donor_ids = std::move(fit.donors);
    problem.target = std::move(fit.target);
    problem.dictionary = std::move(fit.dictionary);
    return solve_simplex_ls(problem);
}

EffectSeries scm_series(const StudyFrame& frame, const TargetSpec& target,
                        const WeightVector& weights) {
    const TargetContext ctx = resolve_target(frame, target);
    const Panel& panel = frame.panel;

    EffectSeries series;
    series.focal = target.label;
    series.estimator = Estimator::Scm;
    for (int k = -ctx.window.pre_periods; k <= ctx.window.max_post; ++k) {
        const int year = ctx.adoption + k;
        double synthetic = 0.0;
        for (std::size_t d = 0; d < ctx.donors.size(); ++d) {
            synthetic += weights.at(ctx.donors[d]) * panel.value_in_year(ctx.donor_idx[d], year);
        }
        series.by_event_time[k] = member_mean(panel, ctx.member_idx, year) - synthetic;
    }
    series.donor_weights = weights;
    series.rmspe = pre_period_rmspe(series.by_event_time, /*skip_minus_one=*/false);
    return series;
}

EffectSeries fe_series(const StudyFrame& frame, const TargetSpec& target,
                       const WeightVector& weights) {
    const TargetContext ctx = resolve_target(frame, target);
    const Panel& panel = frame.panel;
    const int L = ctx.window.pre_periods;

    EffectSeries series;
    series.focal = target.label;
    series.estimator = Estimator::FeAscm;
    for (int k = -L; k <= ctx.window.max_post; ++k) {
        const int year = ctx.adoption + k;
        const double focal_now = member_mean(panel, ctx.member_idx, year);
        double total = 0.0;
        // Weighted DiD against every pre period, averaged: each pre period
        // serves as a comparison point in turn.
        for (int lag = 1; lag <= L; ++lag) {
            const int base_year = ctx.adoption - lag;
            double term = focal_now - member_mean(panel, ctx.member_idx, base_year);
            for (std::size_t d = 0; d < ctx.donors.size(); ++d) {
                const double w = weights.at(ctx.donors[d]);
                if (w == 0.0) continue;
                term -= w * (panel.value_in_year(ctx.donor_idx[d], year) -
                             panel.value_in_year(ctx.donor_idx[d], base_year));
            }
            total += term;
        }
        series.by_event_time[k] = total / static_cast<double>(L);
    }
    series.donor_weights = weights;
    series.rmspe = pre_period_rmspe(series.by_event_time, /*skip_minus_one=*/false);
    return series;
}

} // namespace detail

TwoByTwoTable two_by_two_from_means(double donor_pre, double donor_post, double focal_pre,
                                    double focal_post) {
    TwoByTwoTable t;
    t.donor_pre = donor_pre;
    t.donor_post = donor_post;
    t.focal_pre = focal_pre;
    t.focal_post = focal_post;
    t.did_estimate = (focal_post - focal_pre) - (donor_post - donor_pre);
    return t;
}

TwoByTwoTable did_two_by_two(const StudyFrame& frame, const std::string& focal) {
    return detail::did_table(frame, detail::TargetSpec{{focal}, focal});
}

EffectSeries did_event_study(const StudyFrame& frame, const std::string& focal) {
    return detail::did_series(frame, detail::TargetSpec{{focal}, focal});
}

WeightVector scm_fit(const StudyFrame& frame, const std::string& focal, bool demean) {
    return detail::scm_fit_core(frame, detail::TargetSpec{{focal}, focal}, demean);
}

EffectSeries scm_effects(const StudyFrame& frame, const std::string& focal,
                         const WeightVector& weights) {
    return detail::scm_series(frame, detail::TargetSpec{{focal}, focal}, weights);
}

EffectSeries fe_ascm_effects(const StudyFrame& frame, const std::string& focal) {
    WeightVector weights = scm_fit(frame, focal, /*demean=*/true);
    return detail::fe_series(frame, detail::TargetSpec{{focal}, focal}, weights);
}

EffectSeries fe_ascm_effects_with_weights(const StudyFrame& frame, const std::string& focal,
                                          const WeightVector& weights) {
    return detail::fe_series(frame, detail::TargetSpec{{focal}, focal}, weights);
}

std::map<int, double> fe_ascm_bias(const StudyFrame& frame, const std::string& focal,
                                   const WeightVector& weights) {
    const detail::TargetSpec spec{{focal}, focal};
    EffectSeries raw = detail::scm_series(frame, spec, weights);
    EffectSeries augmented = detail::fe_series(frame, spec, weights);
    std::map<int, double> bias;
    for (const auto& [k, v] : raw.by_event_time) {
        bias[k] = v - augmented.by_event_time.at(k);
    }
    return bias;
}

double rmspe(const EffectSeries& series) {
    double sum_sq = 0.0;
    int n = 0;
    for (const auto& [k, v] : series.by_event_time) {
        if (k >= 0) continue;
        if (series.estimator == Estimator::Did && k == -1) continue;
        sum_sq += v * v;
        ++n;
    }
    if (n == 0) {
        throw EstimationError("series for " + series.focal +
                              " has no informative pre-period entries");
    }
    return std::sqrt(sum_sq / static_cast<double>(n));
}

} // namespace panelkit

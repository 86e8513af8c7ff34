#include "panelkit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "panelkit/errors.hpp"
#include "panelkit/rng.hpp"

namespace panelkit {

std::string weight_law_name(WeightLaw law) {
    return law == WeightLaw::Rademacher ? "rademacher" : "mammen";
}

WeightLaw weight_law_from_name(const std::string& name) {
    if (name == "rademacher") return WeightLaw::Rademacher;
    if (name == "mammen") return WeightLaw::Mammen;
    throw ValidationError("unknown bootstrap weight law '" + name +
                          "' (expected rademacher or mammen)");
}

namespace {

// Comparison-point value subtracted from the event-time outcome. For DiD it
// is the last pre period; the augmented estimator averages over every pre
// period; the plain synthetic control differences nothing.
double reference_value(const Panel& panel, int unit, const ComparisonRecord& rec) {
    switch (rec.estimator) {
        case Estimator::Did:
            return panel.value_in_year(unit, rec.cohort_year - 1);
        case Estimator::Scm:
            return 0.0;
        case Estimator::FeAscm: {
            double sum = 0.0;
            for (int lag = 1; lag <= rec.pre_periods; ++lag) {
                sum += panel.value_in_year(unit, rec.cohort_year - lag);
            }
            return sum / static_cast<double>(rec.pre_periods);
        }
    }
    return 0.0;
}

std::vector<UnitContribution> contributions_impl(const EstimationRun& run,
                                                 const std::vector<std::size_t>& record_indices,
                                                 const std::map<int, double>& point_estimates) {
    if (run.records.empty()) {
        throw EstimationError(
            "run carries no comparison records; estimation must store donor weights first");
    }
    const Panel& panel = run.frame.panel;

    // Unit order follows the panel so that output (and bootstrap multiplier
    // assignment) is deterministic.
    std::map<int, std::map<int, double>> raw_terms; // unit index -> k -> additive term

    for (const auto& [k, estimate] : point_estimates) {
        (void)estimate;
        // Total treated weight across the comparisons that cover this event
        // time; aggregation weights each comparison by its member count.
        double covered_members = 0.0;
        for (std::size_t ri : record_indices) {
            const ComparisonRecord& rec = run.records[ri];
            if (k < -rec.pre_periods || k > rec.max_post) continue;
            covered_members += static_cast<double>(rec.members.size());
        }
        if (covered_members == 0.0) continue;

        for (std::size_t ri : record_indices) {
            const ComparisonRecord& rec = run.records[ri];
            if (k < -rec.pre_periods || k > rec.max_post) continue;
            const int year = rec.cohort_year + k;
            const double member_count = static_cast<double>(rec.members.size());
            for (const auto& m : rec.members) {
                const int u = panel.unit_index(m);
                const double term =
                    (panel.value_in_year(u, year) - reference_value(panel, u, rec)) /
                    covered_members;
                raw_terms[u][k] += term;
            }
            for (std::size_t d = 0; d < rec.donors.size(); ++d) {
                const int u = panel.unit_index(rec.donors[d]);
                const double term = -(member_count / covered_members) * rec.weights[d] *
                                    (panel.value_in_year(u, year) - reference_value(panel, u, rec));
                raw_terms[u][k] += term;
            }
        }
    }

    // Count participants per event time, then rescale so that the mean over
    // participating units reproduces the point estimate.
    std::map<int, int> participants;
    for (const auto& [u, by_k] : raw_terms) {
        (void)u;
        for (const auto& [k, term] : by_k) {
            (void)term;
            participants[k] += 1;
        }
    }

    std::vector<UnitContribution> out;
    for (const auto& [u, by_k] : raw_terms) {
        UnitContribution c;
        c.unit = panel.unit_name(u);
        for (const auto& [k, term] : by_k) {
            c.per_event_time[k] = term * static_cast<double>(participants.at(k));
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace

std::vector<UnitContribution> unit_contributions(const EstimationRun& run) {
    std::vector<std::size_t> all(run.records.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::map<int, double> points;
    for (const auto& [k, cell] : run.att.by_event_time) points[k] = cell.estimate;
    return contributions_impl(run, all, points);
}

std::vector<UnitContribution> unit_contributions_for_records(
    const EstimationRun& run, const std::vector<std::size_t>& record_indices,
    const std::map<int, double>& point_estimates) {
    return contributions_impl(run, record_indices, point_estimates);
}

double percentile_of_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw EstimationError("percentile of an empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::vector<std::vector<double>> bootstrap_replicate_estimates(
    const std::vector<UnitContribution>& contributions,
    const std::map<int, double>& point_estimates, const BootstrapConfig& config, ExecMode mode) {
    if (config.replicates < 100) {
        throw ValidationError("wild bootstrap needs at least 100 replicates for intervals");
    }
    if (!(config.confidence_level > 0.0 && config.confidence_level < 1.0)) {
        throw ValidationError("confidence level must lie strictly between 0 and 1");
    }

    const std::size_t n_units = contributions.size();
    const std::size_t B = static_cast<std::size_t>(config.replicates);

    // Pre-center the contributions per event time.
    struct EventSlice {
        int k;
        double estimate;
        std::vector<std::pair<std::size_t, double>> centered; // (unit position, psi - mean)
    };
    std::vector<EventSlice> slices;
    for (const auto& [k, estimate] : point_estimates) {
        EventSlice slice;
        slice.k = k;
        slice.estimate = estimate;
        double sum = 0.0;
        for (std::size_t u = 0; u < n_units; ++u) {
            auto it = contributions[u].per_event_time.find(k);
            if (it != contributions[u].per_event_time.end()) {
                slice.centered.emplace_back(u, it->second);
                sum += it->second;
            }
        }
        if (slice.centered.empty()) continue;
        const double mean = sum / static_cast<double>(slice.centered.size());
        for (auto& [u, psi] : slice.centered) {
            (void)u;
            psi -= mean;
        }
        slices.push_back(std::move(slice));
    }

    std::vector<std::vector<double>> perturbed(slices.size(), std::vector<double>(B, 0.0));
    const bool rademacher = config.weight_law == WeightLaw::Rademacher;

    for_each_index(B, mode, [&](std::size_t b) {
        Rng rng = Rng::substream(config.seed, b);
        std::vector<double> multipliers(n_units);
        for (std::size_t u = 0; u < n_units; ++u) {
            multipliers[u] = rademacher ? rng.rademacher() : rng.mammen();
        }
        for (std::size_t s = 0; s < slices.size(); ++s) {
            const EventSlice& slice = slices[s];
            double sum = 0.0;
            for (const auto& [u, psi] : slice.centered) sum += multipliers[u] * psi;
            perturbed[s][b] =
                slice.estimate + sum / static_cast<double>(slice.centered.size());
        }
    });

    return perturbed;
}

IntervalSeries wild_bootstrap_ci(const std::vector<UnitContribution>& contributions,
                                 const std::map<int, double>& point_estimates,
                                 const BootstrapConfig& config, ExecMode mode) {
    std::vector<std::vector<double>> perturbed =
        bootstrap_replicate_estimates(contributions, point_estimates, config, mode);

    // Event times in key order, matching the slice construction above.
    std::vector<int> ks;
    for (const auto& [k, estimate] : point_estimates) {
        (void)estimate;
        bool any = false;
        for (const auto& c : contributions) {
            if (c.per_event_time.count(k)) {
                any = true;
                break;
            }
        }
        if (any) ks.push_back(k);
    }

    const double alpha = 1.0 - config.confidence_level;
    IntervalSeries out;
    for (std::size_t s = 0; s < ks.size(); ++s) {
        std::vector<double>& sample = perturbed[s];
        std::sort(sample.begin(), sample.end());
        const double lo = percentile_of_sorted(sample, alpha / 2.0);
        const double hi = percentile_of_sorted(sample, 1.0 - alpha / 2.0);
        out.by_event_time.emplace(ks[s], std::make_pair(lo, hi));
    }
    return out;
}

} // namespace panelkit

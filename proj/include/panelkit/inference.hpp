#ifndef PANELKIT_INFERENCE_HPP
#define PANELKIT_INFERENCE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "panelkit/parallel.hpp"
#include "panelkit/staggered.hpp"

namespace panelkit {

/// Additive per-unit share of the aggregate estimate. At every event time the
/// point estimate equals the mean of the contributions of the units entering
/// the estimate there. A unit appearing in several comparisons (donor for
/// many cohorts, or focal in one and donor elsewhere) has a single aggregated
/// entry.
struct UnitContribution {
    std::string unit;
    std::map<int, double> per_event_time;
};

enum class WeightLaw { Rademacher, Mammen };

std::string weight_law_name(WeightLaw law);
WeightLaw weight_law_from_name(const std::string& name);

struct BootstrapConfig {
    int replicates = 1000;
    std::uint64_t seed = 0;
    WeightLaw weight_law = WeightLaw::Rademacher;
    double confidence_level = 0.95;
};

struct IntervalSeries {
    std::map<int, std::pair<double, double>> by_event_time;
};

/// Decomposes the run's aggregate series into per-unit contributions; see
/// UnitContribution. Throws EstimationError if the run lacks comparison
/// records.
std::vector<UnitContribution> unit_contributions(const EstimationRun& run);

/// Contributions restricted to a subset of the run's comparison records
/// (e.g. a single cohort), normalized against the given point series.
std::vector<UnitContribution> unit_contributions_for_records(
    const EstimationRun& run, const std::vector<std::size_t>& record_indices,
    const std::map<int, double>& point_estimates);

/// Wild bootstrap intervals: each replicate draws one mean-zero unit-variance
/// multiplier per unit and perturbs the estimate by the mean of
/// multiplier * (contribution - mean contribution). Intervals are percentile
/// bounds across replicates. Replicate b draws from a substream derived from
/// (seed, b), so results are identical under any execution order.
/// Requires at least 100 replicates.
IntervalSeries wild_bootstrap_ci(const std::vector<UnitContribution>& contributions,
                                 const std::map<int, double>& point_estimates,
                                 const BootstrapConfig& config,
                                 ExecMode mode = ExecMode::Parallel);

/// The raw perturbed estimates, one row per event time, replicate-major.
/// Exposed for the substream-determinism checks and the benchmark.
std::vector<std::vector<double>> bootstrap_replicate_estimates(
    const std::vector<UnitContribution>& contributions,
    const std::map<int, double>& point_estimates, const BootstrapConfig& config,
    ExecMode mode);

/// Deterministic linear-interpolation percentile of a sorted sample.
double percentile_of_sorted(const std::vector<double>& sorted, double p);

} // namespace panelkit

#endif

#ifndef PANELKIT_PIPELINE_HPP
#define PANELKIT_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "panelkit/diagnostics.hpp"
#include "panelkit/io.hpp"
#include "panelkit/run.hpp"

namespace panelkit {

/// Batch-run configuration. Loadable from a JSON file; command-line flags
/// override file values.
struct RunConfig {
    std::string panel_csv;
    std::string schedule_csv;
    PanelColumns columns;
    int post_horizon = 10;
    int min_pre_periods = 4;
    Estimator estimator = Estimator::FeAscm;
    CohortFitMode fit_mode = CohortFitMode::CohortAverageTarget;
    double pooling_weight = 0.5;
    OutcomeTransform transform = OutcomeTransform::Identity;
    int replicates = 1000;
    std::uint64_t seed = 0;
    WeightLaw weight_law = WeightLaw::Rademacher;
    double confidence_level = 0.95;
    FitThresholds fit_thresholds;
    std::string output_dir = "out";
    bool parallel = true;
};

RunConfig load_run_config(const std::string& path);
/// Range checks plus referenced-path existence. Throws ValidationError.
void validate_run_config(const RunConfig& config);
/// JSON echo of the resolved configuration (embedded in the manifest; enough
/// to re-execute an identical run).
std::string run_config_to_json(const RunConfig& config);

struct PipelineArtifacts {
    StudyFrame frame;
    RunOutput output;
    FitReport fit_report;
    PlotExports exports;
    Table att_table;
    PretrendReport pretrend;
    std::vector<std::string> warnings;
};

/// Load + validate + filter only; returns the frame and accumulated
/// warnings. Used by the `validate` subcommand and the full pipeline.
StudyFrame prepare_frame(const RunConfig& config, std::vector<std::string>& warnings);

/// Full batch run: filter, per-cohort estimation, aggregation, bootstrap,
/// diagnostics. No files are written.
PipelineArtifacts run_pipeline(const RunConfig& config);

/// Writes the export tables, the aggregate table and manifest.json into
/// directory (created if needed). All writes are atomic; re-running an
/// identical configuration produces byte-identical files.
std::vector<std::string> write_results(const PipelineArtifacts& artifacts,
                                       const RunConfig& config, const std::string& directory);

/// Placebo-in-time sweep over shifts 1..max admissible shift.
struct PlaceboSweep {
    std::vector<PlaceboInTimeResult> results;
    PlaceboShiftBound bound;
};

PlaceboSweep run_placebo_sweep(const RunConfig& config);
Table placebo_table(const PlaceboSweep& sweep);

} // namespace panelkit

#endif

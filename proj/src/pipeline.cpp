#include "panelkit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "panelkit/errors.hpp"
#include "panelkit/version.hpp"

namespace panelkit {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string transform_name(OutcomeTransform t) {
    return t == OutcomeTransform::Identity ? "identity" : "log";
}

OutcomeTransform transform_from_name(const std::string& name) {
    if (name == "identity") return OutcomeTransform::Identity;
    if (name == "log") return OutcomeTransform::NaturalLog;
    throw ValidationError("unknown transform '" + name + "' (expected identity or log)");
}

const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "panel_csv",      "schedule_csv",     "unit_column",
        "time_column",    "outcome_column",   "post_horizon",
        "min_pre_periods", "estimator",       "fit_mode",
        "pooling_weight", "transform",        "replicates",
        "seed",           "confidence_level", "weight_law",
        "output_dir",     "parallel",         "poor_fit_sd_fraction",
        "short_pre_periods"};
    return keys;
}

} // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config file " + path + " must hold a JSON object");

    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known_config_keys().count(key)) {
            throw ValidationError("config file " + path + " has unknown key '" + key + "'");
        }
    }

    RunConfig c;
    try {
        if (j.contains("panel_csv")) c.panel_csv = j.at("panel_csv").get<std::string>();
        if (j.contains("schedule_csv")) c.schedule_csv = j.at("schedule_csv").get<std::string>();
        if (j.contains("unit_column")) c.columns.unit = j.at("unit_column").get<std::string>();
        if (j.contains("time_column")) c.columns.time = j.at("time_column").get<std::string>();
        if (j.contains("outcome_column")) {
            c.columns.outcome = j.at("outcome_column").get<std::string>();
        }
        if (j.contains("post_horizon")) c.post_horizon = j.at("post_horizon").get<int>();
        if (j.contains("min_pre_periods")) c.min_pre_periods = j.at("min_pre_periods").get<int>();
        if (j.contains("estimator")) {
            c.estimator = estimator_from_name(j.at("estimator").get<std::string>());
        }
        if (j.contains("fit_mode")) {
            c.fit_mode = fit_mode_from_name(j.at("fit_mode").get<std::string>());
        }
        if (j.contains("pooling_weight")) c.pooling_weight = j.at("pooling_weight").get<double>();
        if (j.contains("transform")) {
            c.transform = transform_from_name(j.at("transform").get<std::string>());
        }
        if (j.contains("replicates")) c.replicates = j.at("replicates").get<int>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("confidence_level")) {
            c.confidence_level = j.at("confidence_level").get<double>();
        }
        if (j.contains("weight_law")) {
            c.weight_law = weight_law_from_name(j.at("weight_law").get<std::string>());
        }
        if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("parallel")) c.parallel = j.at("parallel").get<bool>();
        if (j.contains("poor_fit_sd_fraction")) {
            c.fit_thresholds.poor_fit_sd_fraction = j.at("poor_fit_sd_fraction").get<double>();
        }
        if (j.contains("short_pre_periods")) {
            c.fit_thresholds.short_pre_periods = j.at("short_pre_periods").get<int>();
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("config file " + path + ": " + e.what());
    }
    return c;
}

void validate_run_config(const RunConfig& config) {
    if (config.panel_csv.empty()) throw ValidationError("panel_csv is required");
    if (config.schedule_csv.empty()) throw ValidationError("schedule_csv is required");
    if (!std::filesystem::exists(config.panel_csv)) {
        throw ValidationError("panel file does not exist: " + config.panel_csv);
    }
    if (!std::filesystem::exists(config.schedule_csv)) {
        throw ValidationError("schedule file does not exist: " + config.schedule_csv);
    }
    if (config.post_horizon < 0) throw ValidationError("post_horizon must be non-negative");
    if (config.min_pre_periods < 1) throw ValidationError("min_pre_periods must be at least 1");
    if (!(config.pooling_weight >= 0.0 && config.pooling_weight <= 1.0)) {
        throw ValidationError("pooling_weight must lie in [0, 1]");
    }
    if (config.replicates != 0 && config.replicates < 100) {
        throw ValidationError(
            "replicates must be 0 (no intervals) or at least 100 for interval reporting");
    }
    if (!(config.confidence_level > 0.0 && config.confidence_level < 1.0)) {
        throw ValidationError("confidence_level must lie strictly between 0 and 1");
    }
    if (config.estimator != Estimator::Did && config.pooling_weight > 0.0 &&
        config.fit_mode == CohortFitMode::AverageOfUnits) {
        throw ValidationError("pooling_weight > 0 requires fit_mode = cohort_average_target");
    }
    if (!(config.fit_thresholds.poor_fit_sd_fraction > 0.0)) {
        throw ValidationError("poor_fit_sd_fraction must be positive");
    }
    if (config.fit_thresholds.short_pre_periods < 1) {
        throw ValidationError("short_pre_periods must be at least 1");
    }
    if (config.output_dir.empty()) throw ValidationError("output_dir is required");
}

std::string run_config_to_json(const RunConfig& config) {
    ordered_json j;
    j["panel_csv"] = config.panel_csv;
    j["schedule_csv"] = config.schedule_csv;
    j["unit_column"] = config.columns.unit;
    j["time_column"] = config.columns.time;
    j["outcome_column"] = config.columns.outcome;
    j["post_horizon"] = config.post_horizon;
    j["min_pre_periods"] = config.min_pre_periods;
    j["estimator"] = estimator_name(config.estimator);
    j["fit_mode"] = fit_mode_name(config.fit_mode);
    j["pooling_weight"] = config.pooling_weight;
    j["transform"] = transform_name(config.transform);
    j["replicates"] = config.replicates;
    j["seed"] = config.seed;
    j["confidence_level"] = config.confidence_level;
    j["weight_law"] = weight_law_name(config.weight_law);
    j["output_dir"] = config.output_dir;
    j["parallel"] = config.parallel;
    j["poor_fit_sd_fraction"] = config.fit_thresholds.poor_fit_sd_fraction;
    j["short_pre_periods"] = config.fit_thresholds.short_pre_periods;
    return j.dump(2);
}

StudyFrame prepare_frame(const RunConfig& config, std::vector<std::string>& warnings) {
    validate_run_config(config);

    PanelLoadResult loaded = load_panel(config.panel_csv, config.columns);
    for (auto& w : loaded.warnings) warnings.push_back(std::move(w));
    TreatmentSchedule schedule = load_schedule(config.schedule_csv);

    const int span = loaded.panel.last_time() - loaded.panel.first_time();
    if (config.post_horizon > span) {
        std::ostringstream msg;
        msg << "post_horizon " << config.post_horizon << " exceeds the panel span of " << span
            << " periods (" << loaded.panel.first_time() << "-" << loaded.panel.last_time() << ")";
        throw ValidationError(msg.str());
    }

    Panel transformed = transform_outcome(loaded.panel, config.transform);
    return apply_inclusion_filter(transformed, schedule, config.post_horizon,
                                  config.min_pre_periods);
}

namespace {

EstimationOptions options_from_config(const RunConfig& config) {
    EstimationOptions options;
    options.estimator = config.estimator;
    options.fit_mode = config.fit_mode;
    options.pooling_weight = config.pooling_weight;
    options.bootstrap.replicates = config.replicates;
    options.bootstrap.seed = config.seed;
    options.bootstrap.weight_law = config.weight_law;
    options.bootstrap.confidence_level = config.confidence_level;
    options.outcome_scale = config.transform == OutcomeTransform::NaturalLog ? OutcomeScale::Log
                                                                             : OutcomeScale::Level;
    options.exec = config.parallel ? ExecMode::Parallel : ExecMode::Serial;
    return options;
}

Table build_att_table(const AttResult& att) {
    Table t;
    t.columns = {"event_time", "estimate", "ci_lower", "ci_upper", "n_contributing"};
    for (const auto& [k, cell] : att.by_event_time) {
        t.rows.push_back({std::to_string(k), format_value(cell.estimate),
                          cell.ci_lower ? format_value(*cell.ci_lower) : std::string(),
                          cell.ci_upper ? format_value(*cell.ci_upper) : std::string(),
                          std::to_string(cell.contributing_units)});
    }
    return t;
}

} // namespace

PipelineArtifacts run_pipeline(const RunConfig& config) {
    std::vector<std::string> warnings;
    StudyFrame frame = prepare_frame(config, warnings);

    RunOutput output = run_estimation(frame, options_from_config(config));
    for (const auto& w : output.warnings) warnings.push_back(w);

    FitReport fit_report = build_fit_report(output, config.fit_thresholds);
    PlotExports exports = export_plot_series(output, fit_report);
    Table att_table = build_att_table(output.run.att);
    PretrendReport pretrend = pretrend_series(output.run.att);

    return PipelineArtifacts{std::move(frame),   std::move(output), std::move(fit_report),
                             std::move(exports), std::move(att_table), std::move(pretrend),
                             std::move(warnings)};
}

std::vector<std::string> write_results(const PipelineArtifacts& artifacts,
                                       const RunConfig& config, const std::string& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create output directory " + directory + ": " + ec.message());

    const auto path_of = [&](const std::string& name) {
        return (std::filesystem::path(directory) / name).string();
    };

    std::vector<std::string> written;
    const std::vector<std::pair<std::string, const Table*>> tables = {
        {"att.csv", &artifacts.att_table},
        {"event_study.csv", &artifacts.exports.event_study},
        {"weights.csv", &artifacts.exports.weights},
        {"fit.csv", &artifacts.exports.fit},
        {"counts.csv", &artifacts.exports.counts},
    };
    for (const auto& [name, table] : tables) {
        write_table_atomic(*table, path_of(name));
        written.push_back(name);
    }

    ordered_json manifest;
    manifest["tool"] = "panelkit";
    manifest["version"] = kVersion;
    manifest["format_version"] = kManifestFormatVersion;
    manifest["config"] = ordered_json::parse(run_config_to_json(config));
    manifest["seed"] = config.seed;
    manifest["n_units"] = artifacts.frame.panel.n_units();
    manifest["n_periods"] = artifacts.frame.panel.n_times();
    manifest["n_treated"] = artifacts.frame.treated_units.size();

    ordered_json exclusions = ordered_json::array();
    for (const auto& e : artifacts.frame.exclusions) {
        exclusions.push_back({{"unit", e.unit}, {"reason", e.reason}});
    }
    manifest["exclusions"] = exclusions;
    manifest["warnings"] = artifacts.warnings;
    manifest["pretrend"] = {{"intervals_total", artifacts.pretrend.intervals_total},
                            {"intervals_excluding_zero", artifacts.pretrend.intervals_excluding_zero},
                            {"summary", artifacts.pretrend.summary}};
    if (artifacts.output.pooled) {
        const auto& pooled = *artifacts.output.pooled;
        ordered_json p;
        p["nu"] = pooled.pooling_weight;
        p["pooled_rmspe"] = std::sqrt(pooled.pooled_objective);
        p["aligned_pre_periods"] = pooled.aligned_pre_periods;
        p["converged"] = pooled.converged;
        manifest["pooling"] = p;
    }
    manifest["outputs"] = written;

    write_text_atomic(manifest.dump(2) + "\n", path_of("manifest.json"));
    written.push_back("manifest.json");
    return written;
}

PlaceboSweep run_placebo_sweep(const RunConfig& config) {
    std::vector<std::string> warnings;
    StudyFrame frame = prepare_frame(config, warnings);

    PlaceboSweep sweep;
    sweep.bound = placebo_shift_bound(frame);
    EstimationOptions options = options_from_config(config);
    for (int shift = 1; shift <= sweep.bound.max_shift; ++shift) {
        sweep.results.push_back(placebo_in_time(frame, shift, options));
    }
    return sweep;
}

Table placebo_table(const PlaceboSweep& sweep) {
    Table t;
    t.columns = {"shift", "average_placebo_effect", "ci_lower", "ci_upper"};
    for (const auto& r : sweep.results) {
        t.rows.push_back({std::to_string(r.shift), format_value(r.average_placebo_effect),
                          r.ci_lower ? format_value(*r.ci_lower) : std::string(),
                          r.ci_upper ? format_value(*r.ci_upper) : std::string()});
    }
    return t;
}

} // namespace panelkit

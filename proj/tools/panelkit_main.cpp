#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "panelkit/errors.hpp"
#include "panelkit/fixtures.hpp"
#include "panelkit/pipeline.hpp"
#include "panelkit/version.hpp"

namespace {

struct CliOverrides {
    std::string config_path;
    std::uint64_t seed = 0;
    int post_horizon = 0;
    std::string estimator;
    std::string transform;
    std::string out_dir;
    int replicates = 0;
    double pooling = 0.0;
};

panelkit::RunConfig resolve_config(const CLI::App& app, const CliOverrides& o) {
    panelkit::RunConfig config;
    if (!o.config_path.empty()) config = panelkit::load_run_config(o.config_path);
    // Command-line flags win over file values.
    if (app.count("--seed")) config.seed = o.seed;
    if (app.count("--k")) config.post_horizon = o.post_horizon;
    if (app.count("--estimator")) config.estimator = panelkit::estimator_from_name(o.estimator);
    if (app.count("--transform")) {
        if (o.transform == "identity") {
            config.transform = panelkit::OutcomeTransform::Identity;
        } else if (o.transform == "log") {
            config.transform = panelkit::OutcomeTransform::NaturalLog;
        } else {
            throw panelkit::ValidationError("unknown transform '" + o.transform +
                                            "' (expected identity or log)");
        }
    }
    if (app.count("--out")) config.output_dir = o.out_dir;
    if (app.count("--replicates")) config.replicates = o.replicates;
    if (app.count("--pooling")) config.pooling_weight = o.pooling;
    return config;
}

int do_validate(const panelkit::RunConfig& config) {
    std::vector<std::string> warnings;
    panelkit::StudyFrame frame = panelkit::prepare_frame(config, warnings);
    std::cout << "ok: " << frame.panel.n_units() << " units x " << frame.panel.n_times()
              << " periods, " << frame.treated_units.size() << " evaluable treated units, "
              << frame.cohorts().size() << " cohorts\n";
    for (const auto& e : frame.exclusions) {
        std::cout << "excluded: " << e.unit << " (" << e.reason << ")\n";
    }
    for (const auto& w : warnings) std::cout << "warning: " << w << "\n";
    return 0;
}

int do_estimate(const panelkit::RunConfig& config) {
    panelkit::PipelineArtifacts artifacts = panelkit::run_pipeline(config);
    const auto written = panelkit::write_results(artifacts, config, config.output_dir);
    for (const auto& name : written) {
        std::cout << "wrote " << (std::filesystem::path(config.output_dir) / name).string()
                  << "\n";
    }
    std::cout << artifacts.pretrend.summary << "\n";
    return 0;
}

int do_placebo(const panelkit::RunConfig& config) {
    panelkit::PlaceboSweep sweep = panelkit::run_placebo_sweep(config);
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) {
        throw panelkit::IoError("cannot create output directory " + config.output_dir + ": " +
                                ec.message());
    }
    const std::string path =
        (std::filesystem::path(config.output_dir) / "placebo.csv").string();
    panelkit::write_table_atomic(panelkit::placebo_table(sweep), path);
    std::cout << "wrote " << path << " (max shift " << sweep.bound.max_shift << ", limited by "
              << sweep.bound.limiting_unit << ")\n";
    return 0;
}

int do_export_fixtures(const std::string& out_dir, std::uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw panelkit::IoError("cannot create output directory " + out_dir + ": " + ec.message());
    }
    const panelkit::PanelColumns columns;
    const auto write_pair = [&](const std::string& stem, const panelkit::Panel& panel,
                                const panelkit::TreatmentSchedule& schedule) {
        const auto dir = std::filesystem::path(out_dir);
        panelkit::write_table_atomic(panelkit::panel_to_long_table(panel, columns),
                                     (dir / (stem + "_panel.csv")).string());
        panelkit::write_table_atomic(panelkit::schedule_to_table(schedule),
                                     (dir / (stem + "_schedule.csv")).string());
        std::cout << "wrote " << (dir / (stem + "_panel.csv")).string() << " and "
                  << (dir / (stem + "_schedule.csv")).string() << "\n";
    };

    auto [toy_panel, toy_schedule] = panelkit::toy_fixture(seed, 5.0);
    write_pair("toy", toy_panel, toy_schedule);
    auto [big_panel, big_schedule] = panelkit::staggered_policy_fixture(seed);
    write_pair("staggered", big_panel, big_schedule);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"panelkit: panel-data policy evaluation (DiD, synthetic controls, "
                 "staggered adoption, wild bootstrap)"};
    app.set_version_flag("--version", panelkit::kVersion);
    app.fallthrough();
    app.require_subcommand(1);

    CliOverrides o;
    app.add_option("--config", o.config_path, "JSON configuration file");
    app.add_option("--seed", o.seed, "Seed for all randomness (bootstrap substreams)");
    app.add_option("--k", o.post_horizon, "Post horizon: effects measured for event times 0..K");
    app.add_option("--estimator", o.estimator, "did, scm or fe_ascm");
    app.add_option("--transform", o.transform, "identity or log");
    app.add_option("--out", o.out_dir, "Output directory");
    app.add_option("--replicates", o.replicates, "Bootstrap replicates (0 disables intervals)");
    app.add_option("--pooling", o.pooling, "Pooling weight nu in [0, 1]");

    CLI::App* validate = app.add_subcommand("validate", "Check config and data, then stop");
    CLI::App* estimate = app.add_subcommand("estimate", "Run the full estimation pipeline");
    CLI::App* placebo = app.add_subcommand("placebo", "Placebo-in-time sweep over all shifts");
    CLI::App* fixtures =
        app.add_subcommand("export-fixtures", "Write the bundled synthetic test panels");

    CLI11_PARSE(app, argc, argv);

    try {
        if (fixtures->parsed()) {
            return do_export_fixtures(app.count("--out") ? o.out_dir : "fixtures",
                                      app.count("--seed") ? o.seed : 42);
        }
        const panelkit::RunConfig config = resolve_config(app, o);
        if (validate->parsed()) return do_validate(config);
        if (estimate->parsed()) return do_estimate(config);
        if (placebo->parsed()) return do_placebo(config);
    } catch (const panelkit::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const panelkit::EstimationError& e) {
        std::cerr << "estimation error: " << e.what() << "\n";
        return 2;
    } catch (const panelkit::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

// Command-line experiment runner: dataset generation, incremental training
// sweeps, the strategy ablation, and report aggregation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "edbl/harness.hpp"

namespace fs = std::filesystem;

namespace {

edbl::ExperimentConfig resolve_config(const std::string& config_path, const std::string& preset_name) {
    if (!config_path.empty() && !preset_name.empty()) {
        throw CLI::ValidationError("--config and --preset are mutually exclusive");
    }
    if (!config_path.empty()) return edbl::load_config(config_path);
    if (!preset_name.empty()) return edbl::preset(preset_name);
    return edbl::preset("desk");
}

void apply_overrides(edbl::ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds,
                     const std::vector<std::string>& strategies, const std::string& out_dir) {
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!strategies.empty()) {
        cfg.strategies.clear();
        for (const auto& name : strategies) cfg.strategies.push_back(edbl::strategy_from_name(name));
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
}

int cmd_generate(const edbl::ExperimentConfig& cfg, const std::string& out_dir) {
    const edbl::Dataset ds = edbl::materialize_dataset(cfg.dataset, cfg.seeds.front());
    fs::create_directories(out_dir);
    const auto train_path = (fs::path(out_dir) / "train.csv").string();
    const auto test_path = (fs::path(out_dir) / "test.csv").string();
    edbl::write_csv(train_path, ds.train, ds.feature_dim);
    edbl::write_csv(test_path, ds.test, ds.feature_dim);
    std::cout << "wrote " << train_path << " (" << ds.train.size() << " rows) and " << test_path
              << " (" << ds.test.size() << " rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Class-incremental training engine with re-sampling mixup distillation and "
                 "influence-balanced re-weighting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string preset_name;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> strategies;
    std::string out_dir;

    auto add_common = [&](CLI::App* sub, bool with_strategies) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--preset", preset_name, "named preset (see --list-presets)");
        sub->add_option("--seed,--seeds", seeds, "seed list override")->delimiter(',');
        if (with_strategies) {
            sub->add_option("--strategies", strategies, "strategy list override")->delimiter(',');
        }
        sub->add_option("--out", out_dir, "output directory override");
    };

    auto* generate = app.add_subcommand("generate", "write a synthetic dataset as CSV");
    add_common(generate, false);

    auto* run = app.add_subcommand("run", "run the configured experiment");
    add_common(run, true);

    auto* ablate = app.add_subcommand("ablate", "run every strategy on the desk-scale benchmark");
    add_common(ablate, false);

    std::string report_dir;
    auto* report = app.add_subcommand("report", "aggregate metrics.csv files into a summary table");
    report->add_option("dir", report_dir, "directory to scan")->required();

    bool list_presets = false;
    app.add_flag("--list-presets", list_presets, "print preset names and exit");

    CLI11_PARSE(app, argc, argv);

    if (list_presets) {
        for (const auto& name : edbl::preset_names()) std::cout << name << "\n";
        return 0;
    }

    try {
        if (report->parsed()) {
            return edbl::report_directory(report_dir, std::cout);
        }
        edbl::ExperimentConfig cfg = resolve_config(config_path, preset_name);
        apply_overrides(cfg, seeds, strategies, out_dir);
        if (generate->parsed()) {
            return cmd_generate(cfg, out_dir.empty() ? cfg.out_dir : out_dir);
        }
        if (ablate->parsed()) {
            cfg.strategies = edbl::all_strategies();
        }
        return edbl::run_experiment(cfg, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

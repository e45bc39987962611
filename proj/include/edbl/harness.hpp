#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "edbl/data.hpp"
#include "edbl/protocol.hpp"
#include "edbl/trainer.hpp"

namespace edbl {

struct DatasetSpec {
    enum class Kind { Synthetic, Csv };
    Kind kind = Kind::Synthetic;
    SyntheticSpec synthetic;
    std::uint64_t seed = 1;  // synthetic generation; blended with the run seed
    std::string train_path;
    std::string test_path;
};

// A config file plus this struct determine every output byte of a run.
struct ExperimentConfig {
    std::string run_id = "exp";
    DatasetSpec dataset;
    Protocol protocol;
    TrainConfig train;
    std::vector<Strategy> strategies = {Strategy::BaselineRkd, Strategy::Edbl};
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "runs";
    bool write_checkpoints = true;
};

// JSON round trip for the config file schema (see README).
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Named presets. The table6-* entries carry the published hyper-parameter
// pairs (gamma, alpha) with the shared batch 128 / weight decay 2e-4 /
// momentum 0.9 settings and desk-scale epoch counts; "desk" is the small
// synthetic default used by the ablation harness.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

struct RunResult {
    std::uint64_t seed = 0;
    Strategy strategy = Strategy::Edbl;
    std::vector<PhaseMetrics> metrics;
    std::vector<TaskReport> reports;
    Model final_model;
    ExemplarStore store;
    ClassRegistry registry;
};

// One full pass over a task stream with a fixed strategy: train each task,
// evaluate after each, return everything. Deterministic in (stream, cfg, seed).
RunResult run_incremental(const TaskStream& stream, const TrainConfig& cfg, Strategy strategy,
                          std::uint64_t train_seed, std::ostream* log = nullptr);

// Builds the dataset and stream for one experiment seed.
Dataset materialize_dataset(const DatasetSpec& spec, std::uint64_t seed);
TaskStream materialize_stream(const ExperimentConfig& cfg, std::uint64_t seed);

// Runs every (seed x strategy) combination, writes metrics CSV / per-class
// JSONL / train logs / checkpoints under out_dir, prints a summary table.
// Returns a process exit status.
int run_experiment(const ExperimentConfig& cfg, std::ostream& out);

// Aggregates metrics.csv files found under a directory tree into the same
// summary table run_experiment prints.
int report_directory(const std::string& dir, std::ostream& out);

// First line of every metrics file; bump when columns change.
extern const char* const kMetricsSchema;

}  // namespace edbl

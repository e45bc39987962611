#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edbl/data.hpp"
#include "edbl/influence.hpp"
#include "edbl/losses.hpp"
#include "edbl/mixup.hpp"
#include "edbl/model.hpp"
#include "edbl/rehearsal.hpp"
#include "edbl/rng.hpp"

namespace edbl {

// Training strategies, from the plain rehearsal-distillation baseline to the
// full two-phase method.
enum class Strategy { BaselineRkd, VanillaMkd, IibOnly, ReMkd, IibKd, Edbl };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);
const std::vector<Strategy>& all_strategies();

enum class DataMode { Raw, VanillaMix, ResampledMix };

// What a strategy actually runs: the data each phase consumes, whether the
// balancing phase runs at all, and whether its distillation term is dropped.
struct StrategyPlan {
    DataMode phase1_data = DataMode::Raw;
    bool run_phase2 = false;
    DataMode phase2_data = DataMode::Raw;
    bool zero_gamma2 = false;
};

StrategyPlan strategy_plan(Strategy s);

struct TrainConfig {
    std::size_t epochs_phase1 = 40;
    std::size_t epochs_phase2 = 20;
    double lr_phase1 = 0.1;
    double lr_phase2 = 0.01;
    // 0-based epoch indices at which the phase learning rate is divided by 10.
    std::vector<std::size_t> lr_decay_epochs_phase1 = {16, 27, 35};
    std::vector<std::size_t> lr_decay_epochs_phase2 = {6, 12, 16};
    double gamma1 = 1.0;  // distillation weight in phase 1
    double gamma2 = 1.0;  // distillation weight in phase 2
    double momentum = 0.9;
    double weight_decay = 2e-4;
    std::size_t batch_size = 128;
    std::size_t batches_per_epoch = 8;  // mixed-data epochs
    KdConfig kd;
    BalanceConfig balance;
    ResampleConfig resample;
    Strategy strategy = Strategy::Edbl;
    std::optional<StrategyPlan> custom_plan;  // overrides strategy_plan(strategy)
    std::vector<std::size_t> hidden_dims = {64, 32};

    StrategyPlan plan() const { return custom_plan ? *custom_plan : strategy_plan(strategy); }
};

// Effective learning rate for a 0-based epoch under the decay schedule.
double lr_at(double base, const std::vector<std::size_t>& decay_epochs, std::size_t epoch);

struct EpochLog {
    int phase = 1;
    std::size_t epoch = 0;
    double lr = 0.0;
    double ce = 0.0;
    double kd = 0.0;
    double total = 0.0;
};

struct TaskReport {
    std::size_t task_index = 0;
    Strategy strategy = Strategy::Edbl;
    double imbalance = 1.0;  // N used for the re-sampling schedule (1 at task 0)
    std::vector<EpochLog> epochs;
};

// Mixed samples turned into the matrices one training step consumes.
struct AssembledBatch {
    Matrix inputs;
    Matrix labels_i;
    Matrix labels_j;
    std::vector<double> lambdas;
    std::vector<int> class_i;
    std::vector<int> class_j;
};

AssembledBatch assemble_batch(const std::vector<MixedSample>& batch, const ClassRegistry& registry,
                              std::size_t class_count);

// Phase 1: epochs of SGD on mean mixup cross entropy plus gamma1 times the
// distillation loss, over a fixed set of pre-built batches. Without a frozen
// model the distillation term is skipped.
void phase1_mkd(Model& model, const FrozenModel* frozen,
                const std::vector<std::vector<MixedSample>>& batches, const ClassRegistry& registry,
                const TrainConfig& cfg, TaskReport& report, std::ostream* log);

// Phase 2: balancing epochs on freshly built batches; influence factors are
// recomputed at every forward pass and treated as constants in the gradient.
void phase2_balancing(Model& model, const FrozenModel& frozen,
                      const std::vector<Sample>& old_pool, const std::vector<Sample>& new_pool,
                      const std::map<int, double>& class_weights, const ClassRegistry& registry,
                      const TrainConfig& cfg, DataMode data_mode, double gamma2, Rng& rng,
                      TaskReport& report, std::ostream* log);

// Runs one incremental task end to end: phases per the strategy plan, then
// exemplar selection (herding with the just-trained model) and budget
// reduction. At the first task (no frozen model) training is plain cross
// entropy on the raw task data.
TaskReport train_task(Model& model, const FrozenModel* frozen, const std::vector<Sample>& new_data,
                      ExemplarStore& store, const ClassRegistry& registry, const TrainConfig& cfg,
                      Rng& rng, std::ostream* log = nullptr);

}  // namespace edbl

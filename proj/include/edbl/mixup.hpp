#pragma once

#include <cstddef>
#include <vector>

#include "edbl/data.hpp"
#include "edbl/matrix.hpp"
#include "edbl/model.hpp"
#include "edbl/rng.hpp"

namespace edbl {

enum class MixType { OldOld, OldNew, NewNew };

// Convex blend of two source samples: features = lambda * x_i + (1-lambda) * x_j.
// The source indices refer to the pools handed to the builder (from_old_* says
// which pool), so the blend is reproducible from the recorded sources.
struct MixedSample {
    Matrix features;
    int class_i = 0;
    int class_j = 0;
    std::size_t task_i = 0;
    std::size_t task_j = 0;
    std::size_t index_i = 0;
    std::size_t index_j = 0;
    bool from_old_i = false;
    bool from_old_j = false;
    double lambda = 1.0;
    MixType mix_type = MixType::NewNew;
};

struct ResampleConfig {
    std::size_t min_old_per_batch = 32;  // distinct old source samples required per batch
    std::size_t batch_size = 128;
    std::size_t group_size = 42;  // mixed samples per group; ~batch_size/3 keeps N=1 batches near batch_size
};

// Ratio between the average per-class sample counts of the new and old pools,
// floored at 1.
double imbalance_ratio(const std::vector<Sample>& old_pool, const std::vector<Sample>& new_pool);

// One re-sampled mixed batch: ceil(N/2) old-old groups, ceil(N/2) old-new
// groups and one new-new group, each of group_size samples. Old-side sources
// are drawn class-uniform then sample-uniform (with replacement); while the
// batch has not yet touched min(min_old_per_batch, old pool size) distinct old
// samples, in-class draws prefer untouched ones, and a repair pass afterwards
// swaps duplicated old sources for untouched ones if the floor is still short.
// With an empty old pool the batch degrades to the single new-new group.
std::vector<MixedSample> build_mixed_batch(const std::vector<Sample>& old_pool,
                                           const std::vector<Sample>& new_pool, double n_ratio,
                                           const ResampleConfig& cfg, Rng& rng);

// Plain mixup over one undifferentiated pool: `count` pairs drawn
// sample-uniform with replacement. current_task classifies each side as old
// or new when recording the mix type.
std::vector<MixedSample> build_vanilla_batch(const std::vector<Sample>& pool, std::size_t count,
                                             std::size_t current_task, Rng& rng);

// Frozen-model logits for every mixed sample, row per sample.
Matrix teacher_targets(const std::vector<MixedSample>& batch, const FrozenModel& frozen);

}  // namespace edbl

#include "edbl/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace edbl {

double imbalance_ratio(const std::vector<Sample>& old_pool, const std::vector<Sample>& new_pool) {
    if (old_pool.empty() || new_pool.empty()) {
        throw std::domain_error("imbalance_ratio: both pools must be non-empty");
    }
    const auto old_counts = count_by_class(old_pool);
    const auto new_counts = count_by_class(new_pool);
    const double old_avg = static_cast<double>(old_pool.size()) / static_cast<double>(old_counts.size());
    const double new_avg = static_cast<double>(new_pool.size()) / static_cast<double>(new_counts.size());
    return std::max(1.0, new_avg / old_avg);
}

namespace {

MixedSample make_mixed(const Sample& a, const Sample& b, double lambda, MixType type) {
    MixedSample out;
    out.features = a.features;
    out.features.scale(lambda);
    out.features.add_scaled(b.features, 1.0 - lambda);
    out.class_i = a.class_id;
    out.class_j = b.class_id;
    out.task_i = a.task_id;
    out.task_j = b.task_id;
    out.lambda = lambda;
    out.mix_type = type;
    return out;
}

// Batch plan entry: pool-relative source indices, materialized into features
// only after the distinct-old repair pass has settled the final sources.
struct PlannedMix {
    bool left_old = false;
    bool right_old = false;
    std::size_t left = 0;
    std::size_t right = 0;
    double lambda = 1.0;
    MixType type = MixType::NewNew;
};

}  // namespace

std::vector<MixedSample> build_mixed_batch(const std::vector<Sample>& old_pool,
                                           const std::vector<Sample>& new_pool, double n_ratio,
                                           const ResampleConfig& cfg, Rng& rng) {
    if (new_pool.empty()) throw std::domain_error("build_mixed_batch: new pool is empty");
    if (cfg.group_size == 0) throw std::invalid_argument("build_mixed_batch: zero group size");
    if (n_ratio < 1.0) throw std::domain_error("build_mixed_batch: ratio below 1");

    auto draw_new = [&]() { return rng.uniform_index(new_pool.size()); };

    std::vector<PlannedMix> plan;

    if (old_pool.empty()) {
        // First task: nothing to rehearse, emit the new-new group only.
        for (std::size_t s = 0; s < cfg.group_size; ++s) {
            PlannedMix p;
            p.left = draw_new();
            p.right = draw_new();
            p.lambda = sample_beta(rng, 1.0, 1.0);
            plan.push_back(p);
        }
    } else {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < old_pool.size(); ++i) by_class[old_pool[i].class_id].push_back(i);
        std::vector<int> old_classes;
        for (const auto& [id, _] : by_class) old_classes.push_back(id);

        const std::size_t floor = std::min(cfg.min_old_per_batch, old_pool.size());
        std::set<std::size_t> used_old;

        // Class-uniform then sample-uniform; while the distinct floor is
        // unmet, prefer untouched samples within the drawn class.
        auto draw_old = [&]() {
            const auto& members = by_class.at(old_classes[rng.uniform_index(old_classes.size())]);
            if (used_old.size() < floor) {
                std::vector<std::size_t> untouched;
                for (std::size_t i : members) {
                    if (!used_old.count(i)) untouched.push_back(i);
                }
                if (!untouched.empty()) {
                    const std::size_t pick = untouched[rng.uniform_index(untouched.size())];
                    used_old.insert(pick);
                    return pick;
                }
            }
            const std::size_t pick = members[rng.uniform_index(members.size())];
            used_old.insert(pick);
            return pick;
        };

        const auto half_groups = static_cast<std::size_t>(std::ceil(n_ratio / 2.0));
        for (std::size_t g = 0; g < half_groups; ++g) {
            for (std::size_t s = 0; s < cfg.group_size; ++s) {
                PlannedMix p;
                p.left_old = p.right_old = true;
                p.left = draw_old();
                p.right = draw_old();
                p.lambda = sample_beta(rng, 1.0, 1.0);
                p.type = MixType::OldOld;
                plan.push_back(p);
            }
        }
        for (std::size_t g = 0; g < half_groups; ++g) {
            for (std::size_t s = 0; s < cfg.group_size; ++s) {
                PlannedMix p;
                p.left_old = true;
                p.left = draw_old();
                p.right = draw_new();
                p.lambda = sample_beta(rng, 1.0, 1.0);
                p.type = MixType::OldNew;
                plan.push_back(p);
            }
        }
        for (std::size_t s = 0; s < cfg.group_size; ++s) {
            PlannedMix p;
            p.left = draw_new();
            p.right = draw_new();
            p.lambda = sample_beta(rng, 1.0, 1.0);
            plan.push_back(p);
        }

        // Repair pass: swap duplicated old sources for untouched ones until
        // the distinct floor holds (or no duplicates remain).
        if (used_old.size() < floor) {
            std::map<std::size_t, std::size_t> usage;
            for (const auto& p : plan) {
                if (p.left_old) ++usage[p.left];
                if (p.right_old) ++usage[p.right];
            }
            std::vector<std::size_t> untouched;
            for (std::size_t i = 0; i < old_pool.size(); ++i) {
                if (!used_old.count(i)) untouched.push_back(i);
            }
            auto swap_in = [&](std::size_t& slot) {
                if (used_old.size() >= floor || untouched.empty()) return;
                if (usage[slot] < 2) return;
                const std::size_t at = rng.uniform_index(untouched.size());
                const std::size_t fresh = untouched[at];
                untouched.erase(untouched.begin() + static_cast<std::ptrdiff_t>(at));
                --usage[slot];
                ++usage[fresh];
                used_old.insert(fresh);
                slot = fresh;
            };
            for (auto& p : plan) {
                if (p.left_old) swap_in(p.left);
                if (p.right_old) swap_in(p.right);
            }
        }
    }

    std::vector<MixedSample> batch;
    batch.reserve(plan.size());
    for (const auto& p : plan) {
        const Sample& a = p.left_old ? old_pool[p.left] : new_pool[p.left];
        const Sample& b = p.right_old ? old_pool[p.right] : new_pool[p.right];
        MixedSample m = make_mixed(a, b, p.lambda, p.type);
        m.index_i = p.left;
        m.index_j = p.right;
        m.from_old_i = p.left_old;
        m.from_old_j = p.right_old;
        batch.push_back(std::move(m));
    }
    return batch;
}

std::vector<MixedSample> build_vanilla_batch(const std::vector<Sample>& pool, std::size_t count,
                                             std::size_t current_task, Rng& rng) {
    if (pool.empty()) throw std::domain_error("build_vanilla_batch: empty pool");
    std::vector<MixedSample> batch;
    batch.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t ia = rng.uniform_index(pool.size());
        const std::size_t ib = rng.uniform_index(pool.size());
        const Sample& a = pool[ia];
        const Sample& b = pool[ib];
        const double lambda = sample_beta(rng, 1.0, 1.0);
        const bool a_old = a.task_id < current_task;
        const bool b_old = b.task_id < current_task;
        MixType type = MixType::NewNew;
        if (a_old && b_old) type = MixType::OldOld;
        else if (a_old || b_old) type = MixType::OldNew;
        MixedSample m = make_mixed(a, b, lambda, type);
        m.index_i = ia;
        m.index_j = ib;
        batch.push_back(std::move(m));
    }
    return batch;
}

Matrix teacher_targets(const std::vector<MixedSample>& batch, const FrozenModel& frozen) {
    if (batch.empty()) return Matrix(0, frozen.class_count());
    Matrix inputs(batch.size(), batch.front().features.cols());
    for (std::size_t i = 0; i < batch.size(); ++i) inputs.set_row(i, batch[i].features);
    return frozen.forward(inputs).logits;
}

}  // namespace edbl

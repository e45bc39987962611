#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <set>

#include "edbl/mixup.hpp"

using namespace edbl;

namespace {

std::vector<Sample> make_pool(const std::vector<int>& classes, std::size_t per_class,
                              std::size_t task_id, double base) {
    std::vector<Sample> pool;
    for (int cls : classes) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Sample s;
            s.features = Matrix::from_rows({{base + cls, static_cast<double>(i)}});
            s.class_id = cls;
            s.task_id = task_id;
            pool.push_back(std::move(s));
        }
    }
    return pool;
}

struct GroupCounts {
    std::size_t old_old = 0;
    std::size_t old_new = 0;
    std::size_t new_new = 0;
};

GroupCounts count_types(const std::vector<MixedSample>& batch) {
    GroupCounts c;
    for (const auto& m : batch) {
        if (m.mix_type == MixType::OldOld) ++c.old_old;
        else if (m.mix_type == MixType::OldNew) ++c.old_new;
        else ++c.new_new;
    }
    return c;
}

std::size_t distinct_old_sources(const std::vector<MixedSample>& batch) {
    std::set<std::size_t> seen;
    for (const auto& m : batch) {
        if (m.from_old_i) seen.insert(m.index_i);
        if (m.from_old_j) seen.insert(m.index_j);
    }
    return seen.size();
}

}  // namespace

TEST_CASE("imbalance ratio arithmetic") {
    const auto old_pool = make_pool({0, 1}, 20, 0, 0.0);
    const auto new_pool = make_pool({2, 3}, 500, 1, 10.0);
    CHECK(imbalance_ratio(old_pool, new_pool) == doctest::Approx(25.0));

    const auto balanced_old = make_pool({0}, 50, 0, 0.0);
    const auto balanced_new = make_pool({1}, 50, 1, 10.0);
    CHECK(imbalance_ratio(balanced_old, balanced_new) == 1.0);

    // fewer new samples per class than old: floored at 1
    CHECK(imbalance_ratio(new_pool, old_pool) == 1.0);

    CHECK_THROWS_AS(imbalance_ratio({}, new_pool), std::domain_error);
    CHECK_THROWS_AS(imbalance_ratio(old_pool, {}), std::domain_error);
}

TEST_CASE("re-sampled batch follows the ceil(N/2) group schedule") {
    Rng rng(1);
    const auto old_pool = make_pool({0, 1}, 30, 0, 0.0);
    const auto new_pool = make_pool({2, 3}, 100, 1, 10.0);

    ResampleConfig cfg;
    cfg.group_size = 32;
    cfg.min_old_per_batch = 32;

    auto batch = build_mixed_batch(old_pool, new_pool, 25.0, cfg, rng);
    GroupCounts counts = count_types(batch);
    CHECK(counts.old_old == 13 * 32);
    CHECK(counts.old_new == 13 * 32);
    CHECK(counts.new_new == 32);

    batch = build_mixed_batch(old_pool, new_pool, 1.0, cfg, rng);
    counts = count_types(batch);
    CHECK(counts.old_old == 32);
    CHECK(counts.old_new == 32);
    CHECK(counts.new_new == 32);
}

TEST_CASE("deterministic group-type ratio") {
    Rng rng(2);
    const auto old_pool = make_pool({0, 1, 2}, 10, 0, 0.0);
    const auto new_pool = make_pool({3, 4}, 60, 1, 10.0);
    ResampleConfig cfg;
    cfg.group_size = 8;
    for (double n : {1.0, 3.0, 7.0, 12.0}) {
        for (int rep = 0; rep < 5; ++rep) {
            const auto batch = build_mixed_batch(old_pool, new_pool, n, cfg, rng);
            const GroupCounts counts = count_types(batch);
            const auto half = static_cast<std::size_t>(std::ceil(n / 2.0));
            CHECK((counts.old_old + counts.old_new) == 2 * half * cfg.group_size);
            CHECK(counts.new_new == cfg.group_size);
        }
    }
}

TEST_CASE("distinct old-source floor holds across pool sizes") {
    Rng rng(3);
    ResampleConfig cfg;
    cfg.group_size = 8;
    const auto new_pool = make_pool({10, 11}, 80, 2, 20.0);
    for (std::size_t pool_size : {5, 20, 40, 100}) {
        const auto old_pool = make_pool({0, 1, 2, 3, 4}, pool_size / 5, 0, 0.0);
        for (std::size_t min_old : {4, 8, 32}) {
            cfg.min_old_per_batch = min_old;
            const auto batch = build_mixed_batch(old_pool, new_pool, 5.0, cfg, rng);
            CHECK(distinct_old_sources(batch) >= std::min(min_old, old_pool.size()));
        }
    }
}

TEST_CASE("old pool of 40 with a floor of 32 uses at least 32 distinct sources") {
    Rng rng(4);
    const auto old_pool = make_pool({0, 1, 2, 3}, 10, 0, 0.0);
    const auto new_pool = make_pool({5, 6}, 50, 1, 10.0);
    ResampleConfig cfg;
    cfg.group_size = 16;
    cfg.min_old_per_batch = 32;
    const auto batch = build_mixed_batch(old_pool, new_pool, 4.0, cfg, rng);
    CHECK(distinct_old_sources(batch) >= 32);
}

TEST_CASE("empty old pool degrades to new-new mixing only") {
    Rng rng(5);
    const auto new_pool = make_pool({0, 1}, 20, 0, 0.0);
    ResampleConfig cfg;
    cfg.group_size = 12;
    const auto batch = build_mixed_batch({}, new_pool, 1.0, cfg, rng);
    CHECK(batch.size() == 12);
    for (const auto& m : batch) CHECK(m.mix_type == MixType::NewNew);
}

TEST_CASE("every mixed sample reproduces its recorded blend") {
    Rng rng(6);
    const auto old_pool = make_pool({0, 1}, 15, 0, 0.0);
    const auto new_pool = make_pool({2, 3}, 40, 1, 10.0);
    ResampleConfig cfg;
    cfg.group_size = 10;
    cfg.min_old_per_batch = 8;
    const auto batch = build_mixed_batch(old_pool, new_pool, 6.0, cfg, rng);
    for (const auto& m : batch) {
        const Sample& a = m.from_old_i ? old_pool[m.index_i] : new_pool[m.index_i];
        const Sample& b = m.from_old_j ? old_pool[m.index_j] : new_pool[m.index_j];
        Matrix want = a.features;
        want.scale(m.lambda);
        want.add_scaled(b.features, 1.0 - m.lambda);
        CHECK(m.features.values() == want.values());
        CHECK(m.class_i == a.class_id);
        CHECK(m.class_j == b.class_id);
        CHECK(m.lambda >= 0.0);
        CHECK(m.lambda <= 1.0);
    }
}

TEST_CASE("batch construction is deterministic under a fixed seed") {
    const auto old_pool = make_pool({0, 1}, 12, 0, 0.0);
    const auto new_pool = make_pool({2}, 30, 1, 10.0);
    ResampleConfig cfg;
    cfg.group_size = 6;
    Rng a(99);
    Rng b(99);
    const auto ba = build_mixed_batch(old_pool, new_pool, 3.0, cfg, a);
    const auto bb = build_mixed_batch(old_pool, new_pool, 3.0, cfg, b);
    REQUIRE(ba.size() == bb.size());
    for (std::size_t i = 0; i < ba.size(); ++i) {
        CHECK(ba[i].features.values() == bb[i].features.values());
        CHECK(ba[i].lambda == bb[i].lambda);
        CHECK(ba[i].index_i == bb[i].index_i);
        CHECK(ba[i].index_j == bb[i].index_j);
    }
}

TEST_CASE("vanilla mixing classifies sides against the current task") {
    Rng rng(7);
    auto pool = make_pool({0, 1}, 10, 0, 0.0);
    const auto new_part = make_pool({2}, 10, 2, 10.0);
    pool.insert(pool.end(), new_part.begin(), new_part.end());
    const auto batch = build_vanilla_batch(pool, 200, 2, rng);
    CHECK(batch.size() == 200);
    bool saw_old_old = false, saw_old_new = false, saw_new_new = false;
    for (const auto& m : batch) {
        const Sample& a = pool[m.index_i];
        const Sample& b = pool[m.index_j];
        const int old_sides = (a.task_id < 2 ? 1 : 0) + (b.task_id < 2 ? 1 : 0);
        if (old_sides == 2) {
            CHECK(m.mix_type == MixType::OldOld);
            saw_old_old = true;
        } else if (old_sides == 1) {
            CHECK(m.mix_type == MixType::OldNew);
            saw_old_new = true;
        } else {
            CHECK(m.mix_type == MixType::NewNew);
            saw_new_new = true;
        }
    }
    CHECK(saw_old_old);
    CHECK(saw_old_new);
    CHECK(saw_new_new);
}

TEST_CASE("teacher targets delegate to the frozen model") {
    Rng rng(8);
    Model model({2, 3}, 2, rng);
    const FrozenModel frozen = model.freeze();

    CHECK(teacher_targets({}, frozen).rows() == 0);

    MixedSample m;
    m.features = Matrix::from_rows({{0.5, -1.0}});
    m.lambda = 1.0;
    const Matrix single = teacher_targets({m}, frozen);
    const Matrix direct = frozen.forward(m.features).logits;
    CHECK(single.values() == direct.values());

    const Matrix twice = teacher_targets({m, m}, frozen);
    for (std::size_t c = 0; c < twice.cols(); ++c) CHECK(twice(0, c) == twice(1, c));
}

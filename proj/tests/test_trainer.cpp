#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <optional>
#include <sstream>

#include "edbl/protocol.hpp"
#include "edbl/trainer.hpp"

using namespace edbl;

namespace {

TrainConfig tiny_config(Strategy strategy) {
    TrainConfig cfg;
    cfg.strategy = strategy;
    cfg.epochs_phase1 = 3;
    cfg.epochs_phase2 = 2;
    cfg.lr_phase1 = 0.05;
    cfg.lr_phase2 = 0.01;
    cfg.lr_decay_epochs_phase1 = {2};
    cfg.lr_decay_epochs_phase2 = {1};
    cfg.batch_size = 16;
    cfg.batches_per_epoch = 2;
    cfg.hidden_dims = {8, 6};
    cfg.resample.group_size = 5;
    cfg.resample.min_old_per_batch = 4;
    cfg.balance.gamma = 4.0;
    cfg.balance.alpha = 0.5;
    return cfg;
}

TaskStream tiny_stream(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.classes = 4;
    spec.dims = 5;
    spec.train_per_class = 15;
    spec.test_per_class = 5;
    spec.separation = 3.0;
    Rng data_rng(seed);
    const Dataset ds = generate_synthetic(spec, data_rng);
    Rng split_rng(seed + 1);
    return split_stream(ds, Protocol{ProtocolKind::Base0, 2, 12, 0}, split_rng);
}

struct TwoTaskRun {
    Model model;
    std::vector<TaskReport> reports;
    ExemplarStore store;
};

TwoTaskRun run_two_tasks(const TrainConfig& cfg, const TaskStream& stream, std::uint64_t seed) {
    Rng rng(seed);
    ClassRegistry registry;
    ExemplarStore store = stream.make_store();
    Model model;
    std::optional<FrozenModel> frozen;
    std::vector<TaskReport> reports;
    for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
        const Task& task = stream.tasks[t];
        registry.add_classes(task.classes);
        if (t == 0) {
            model = Model({stream.tasks[0].train.front().features.cols(), cfg.hidden_dims[0],
                           cfg.hidden_dims[1]},
                          task.classes.size(), rng);
        } else {
            frozen = model.freeze();
            model = model.expand_head(task.classes.size(), rng);
        }
        reports.push_back(
            train_task(model, frozen ? &*frozen : nullptr, task.train, store, registry, cfg, rng));
    }
    return {std::move(model), std::move(reports), std::move(store)};
}

}  // namespace

TEST_CASE("strategy plans route the phases") {
    CHECK(strategy_plan(Strategy::BaselineRkd).run_phase2 == false);
    CHECK(strategy_plan(Strategy::BaselineRkd).phase1_data == DataMode::Raw);
    CHECK(strategy_plan(Strategy::VanillaMkd).phase1_data == DataMode::VanillaMix);
    CHECK(strategy_plan(Strategy::IibOnly).run_phase2 == true);
    CHECK(strategy_plan(Strategy::IibOnly).zero_gamma2 == true);
    CHECK(strategy_plan(Strategy::ReMkd).phase1_data == DataMode::ResampledMix);
    CHECK(strategy_plan(Strategy::IibKd).zero_gamma2 == false);
    CHECK(strategy_plan(Strategy::Edbl).phase2_data == DataMode::ResampledMix);
    for (Strategy s : all_strategies()) CHECK(strategy_from_name(strategy_name(s)) == s);
    CHECK_THROWS_AS(strategy_from_name("nope"), std::invalid_argument);
}

TEST_CASE("baseline runs phase 1 only on raw data") {
    const TaskStream stream = tiny_stream(10);
    const TwoTaskRun run = run_two_tasks(tiny_config(Strategy::BaselineRkd), stream, 77);
    for (const auto& report : run.reports) {
        CHECK(report.epochs.size() == 3);
        for (const auto& e : report.epochs) CHECK(e.phase == 1);
    }
    // task 0 never sees a distillation term
    for (const auto& e : run.reports[0].epochs) CHECK(e.kd == 0.0);
    // task 1 does
    bool kd_seen = false;
    for (const auto& e : run.reports[1].epochs) kd_seen = kd_seen || e.kd != 0.0;
    CHECK(kd_seen);
}

TEST_CASE("the full method with no balancing epochs equals the mixup-only strategy") {
    const TaskStream stream = tiny_stream(11);
    TrainConfig edbl = tiny_config(Strategy::Edbl);
    edbl.epochs_phase2 = 0;
    TrainConfig remkd = tiny_config(Strategy::ReMkd);
    remkd.epochs_phase2 = 0;

    const TwoTaskRun a = run_two_tasks(edbl, stream, 33);
    const TwoTaskRun b = run_two_tasks(remkd, stream, 33);
    CHECK(a.model.head().weights.values() == b.model.head().weights.values());
    for (std::size_t l = 0; l < a.model.hidden().size(); ++l) {
        CHECK(a.model.hidden()[l].weights.values() == b.model.hidden()[l].weights.values());
    }
}

TEST_CASE("training is bit-reproducible for every strategy") {
    const TaskStream stream = tiny_stream(12);
    for (Strategy s : all_strategies()) {
        const TwoTaskRun a = run_two_tasks(tiny_config(s), stream, 55);
        const TwoTaskRun b = run_two_tasks(tiny_config(s), stream, 55);
        CHECK(a.model.head().weights.values() == b.model.head().weights.values());
        for (std::size_t l = 0; l < a.model.hidden().size(); ++l) {
            CHECK(a.model.hidden()[l].weights.values() == b.model.hidden()[l].weights.values());
            CHECK(a.model.hidden()[l].bias.values() == b.model.hidden()[l].bias.values());
        }
    }
}

TEST_CASE("a single phase-1 step reproduces the hand-assembled update") {
    Rng rng(1);
    Model model({3, 4, 3}, 2, rng);
    const Model before = model;
    FrozenModel frozen = before.freeze();

    MixedSample m;
    m.features = Matrix::from_rows({{0.4, -0.2, 1.0}});
    m.class_i = 0;
    m.class_j = 1;
    m.lambda = 0.7;
    ClassRegistry registry;
    registry.add_classes({0, 1});

    TrainConfig cfg = tiny_config(Strategy::Edbl);
    cfg.epochs_phase1 = 1;
    cfg.lr_phase1 = 0.1;
    cfg.lr_decay_epochs_phase1.clear();
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.gamma1 = 0.8;

    TaskReport report;
    report.task_index = 1;
    phase1_mkd(model, &frozen, {{m}}, registry, cfg, report, nullptr);

    // independent assembly of the same step
    Model want = before;
    const ForwardTrace trace = want.forward(m.features);
    const Matrix labels_i = one_hot_rows({0}, 2);
    const Matrix labels_j = one_hot_rows({1}, 2);
    LossResult ce = mixup_ce_loss(trace.logits, labels_i, labels_j, 0.7);
    const Matrix teacher = frozen.forward(m.features).logits;
    LossResult kd = kd_loss(trace.logits, teacher, cfg.kd, 2);
    Matrix d_logits = ce.d_logits;
    d_logits.add_scaled(kd.d_logits, 0.8);
    const GradientSet grads = want.backward(trace, d_logits);
    OptState state;
    sgd_step(want, grads, 0.1, 0.0, 0.0, state);

    CHECK(model.head().weights.values() == want.head().weights.values());
    for (std::size_t l = 0; l < model.hidden().size(); ++l) {
        CHECK(model.hidden()[l].weights.values() == want.hidden()[l].weights.values());
    }
    CHECK(report.epochs.size() == 1);
    CHECK(report.epochs[0].total == doctest::Approx(ce.value + 0.8 * kd.value));
}

TEST_CASE("gamma1 zero trains on mixup alone") {
    Rng rng(2);
    Model model({3, 4, 3}, 2, rng);
    Model twin = model;
    FrozenModel frozen = model.freeze();

    MixedSample m;
    m.features = Matrix::from_rows({{1.0, 0.5, -0.5}});
    m.class_i = 0;
    m.class_j = 0;
    m.lambda = 1.0;
    ClassRegistry registry;
    registry.add_classes({0, 1});

    TrainConfig cfg = tiny_config(Strategy::Edbl);
    cfg.epochs_phase1 = 1;
    cfg.lr_decay_epochs_phase1.clear();
    cfg.gamma1 = 0.0;
    TaskReport r1;
    r1.task_index = 1;
    phase1_mkd(model, &frozen, {{m}}, registry, cfg, r1, nullptr);

    // same update without any teacher at all
    TaskReport r2;
    r2.task_index = 0;
    phase1_mkd(twin, nullptr, {{m}}, registry, cfg, r2, nullptr);
    CHECK(model.head().weights.values() == twin.head().weights.values());
    CHECK(r1.epochs[0].total == doctest::Approx(r1.epochs[0].ce));
}

TEST_CASE("a teacher-matched student takes the same first step under any distillation weight") {
    Rng rng(3);
    Model a({3, 4, 3}, 3, rng);
    Model b = a;
    FrozenModel frozen = a.freeze();

    MixedSample m;
    m.features = Matrix::from_rows({{0.3, 0.9, -1.2}});
    m.class_i = 1;
    m.class_j = 1;
    m.lambda = 1.0;
    ClassRegistry registry;
    registry.add_classes({0, 1, 2});

    TrainConfig cfg = tiny_config(Strategy::Edbl);
    cfg.epochs_phase1 = 1;
    cfg.lr_decay_epochs_phase1.clear();

    cfg.gamma1 = 0.0;
    TaskReport ra;
    ra.task_index = 1;
    phase1_mkd(a, &frozen, {{m}}, registry, cfg, ra, nullptr);

    cfg.gamma1 = 1000.0;
    TaskReport rb;
    rb.task_index = 1;
    phase1_mkd(b, &frozen, {{m}}, registry, cfg, rb, nullptr);

    // the distillation gradient of a teacher-matched student is exactly zero
    CHECK(a.head().weights.values() == b.head().weights.values());
}

TEST_CASE("learning rates follow the configured step schedule") {
    const TaskStream stream = tiny_stream(13);
    TrainConfig cfg = tiny_config(Strategy::Edbl);
    cfg.epochs_phase1 = 5;
    cfg.epochs_phase2 = 4;
    cfg.lr_decay_epochs_phase1 = {2, 4};
    cfg.lr_decay_epochs_phase2 = {2};
    const TwoTaskRun run = run_two_tasks(cfg, stream, 88);

    const TaskReport& report = run.reports[1];
    REQUIRE(report.epochs.size() == 9);
    const double base1 = cfg.lr_phase1;
    CHECK(report.epochs[0].lr == base1);
    CHECK(report.epochs[1].lr == base1);
    CHECK(report.epochs[2].lr == doctest::Approx(base1 * 0.1));
    CHECK(report.epochs[3].lr == doctest::Approx(base1 * 0.1));
    CHECK(report.epochs[4].lr == doctest::Approx(base1 * 0.01));
    const double base2 = cfg.lr_phase2;
    CHECK(report.epochs[5].lr == base2);
    CHECK(report.epochs[6].lr == base2);
    CHECK(report.epochs[7].lr == doctest::Approx(base2 * 0.1));
    CHECK(report.epochs[8].lr == doctest::Approx(base2 * 0.1));

    // non-increasing within each phase
    for (std::size_t i = 1; i < report.epochs.size(); ++i) {
        if (report.epochs[i].phase == report.epochs[i - 1].phase) {
            CHECK(report.epochs[i].lr <= report.epochs[i - 1].lr);
        }
    }
}

TEST_CASE("phase 2 follows phase 1 and the frozen teacher never moves") {
    const TaskStream stream = tiny_stream(14);
    TrainConfig cfg = tiny_config(Strategy::Edbl);

    Rng rng(66);
    ClassRegistry registry;
    ExemplarStore store = stream.make_store();
    registry.add_classes(stream.tasks[0].classes);
    Model model({stream.tasks[0].train.front().features.cols(), 8, 6},
                stream.tasks[0].classes.size(), rng);
    train_task(model, nullptr, stream.tasks[0].train, store, registry, cfg, rng);

    FrozenModel frozen = model.freeze();
    const Matrix probe = gaussian_matrix(4, stream.tasks[0].train.front().features.cols(), 1.0, rng);
    const Matrix before = frozen.forward(probe).logits;

    registry.add_classes(stream.tasks[1].classes);
    model = model.expand_head(stream.tasks[1].classes.size(), rng);
    const TaskReport report =
        train_task(model, &frozen, stream.tasks[1].train, store, registry, cfg, rng);

    CHECK(frozen.forward(probe).logits.values() == before.values());

    int last_phase = 1;
    bool saw_phase2 = false;
    for (const auto& e : report.epochs) {
        CHECK(e.phase >= last_phase);
        last_phase = e.phase;
        saw_phase2 = saw_phase2 || e.phase == 2;
    }
    CHECK(saw_phase2);
}

TEST_CASE("the missing-teacher and task-ordering preconditions are enforced") {
    const TaskStream stream = tiny_stream(15);
    TrainConfig cfg = tiny_config(Strategy::BaselineRkd);
    Rng rng(44);
    ClassRegistry registry;
    registry.add_classes(stream.tasks[0].classes);
    registry.add_classes(stream.tasks[1].classes);
    ExemplarStore store = stream.make_store();
    Model model({5, 8, 6}, 4, rng);
    CHECK_THROWS_AS(
        train_task(model, nullptr, stream.tasks[1].train, store, registry, cfg, rng),
        std::logic_error);
}

TEST_CASE("balancing with alpha 0 reproduces plain influence-balance loss values") {
    Rng rng(5);
    const std::size_t m = 2, n = 2;
    BalancingBatch b;
    b.student_logits = gaussian_matrix(6, m + n, 1.0, rng);
    b.teacher_logits = gaussian_matrix(6, m, 1.0, rng);
    b.features = gaussian_matrix(6, 4, 1.0, rng);
    std::vector<std::size_t> picks;
    for (int i = 0; i < 6; ++i) {
        picks.push_back(rng.uniform_index(m + n));
        b.mix.push_back(1.0);
        b.class_term.push_back(0.5 + rng.uniform());
    }
    b.labels_i = one_hot_rows(picks, m + n);
    b.labels_j = b.labels_i;

    BalanceConfig cfg;
    cfg.alpha = 0.0;
    KdConfig kd;
    const BalancingResult res = overall_balancing_loss(b, cfg, 0.0, kd, m);

    const Matrix probs = softmax(b.student_logits, 1.0);
    const auto ce = ce_per_sample(b.student_logits, b.labels_i);
    double want = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double factor =
            ib_factor(probs.row(i), SoftLabel::from_row(b.labels_i.row(i)), b.features.row(i));
        want += iib_loss(ce[i], factor, b.class_term[i], cfg.epsilon);
    }
    want /= 6.0;
    CHECK(res.value == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("the pipeline composes: custom plans splice strategies together") {
    const TaskStream stream = tiny_stream(16);

    // full method with vanilla data everywhere
    TrainConfig spliced = tiny_config(Strategy::Edbl);
    spliced.custom_plan = StrategyPlan{DataMode::VanillaMix, true, DataMode::VanillaMix, false};

    // same plan expressed through the strategy enum of phase 1, phase 2 added
    TrainConfig reference = tiny_config(Strategy::VanillaMkd);
    reference.custom_plan = StrategyPlan{DataMode::VanillaMix, true, DataMode::VanillaMix, false};

    const TwoTaskRun a = run_two_tasks(spliced, stream, 91);
    const TwoTaskRun b = run_two_tasks(reference, stream, 91);
    CHECK(a.model.head().weights.values() == b.model.head().weights.values());
}

TEST_CASE("task reports log the imbalance ratio used by the schedule") {
    const TaskStream stream = tiny_stream(17);
    const TwoTaskRun run = run_two_tasks(tiny_config(Strategy::Edbl), stream, 21);
    CHECK(run.reports[0].imbalance == 1.0);
    CHECK(run.reports[1].imbalance >= 1.0);
}

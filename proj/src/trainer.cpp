#include "edbl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

namespace edbl {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::BaselineRkd: return "baseline";
        case Strategy::VanillaMkd: return "vanilla-mkd";
        case Strategy::IibOnly: return "iib";
        case Strategy::ReMkd: return "re-mkd";
        case Strategy::IibKd: return "iib-kd";
        case Strategy::Edbl: return "edbl";
    }
    throw std::logic_error("strategy_name: unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
    for (Strategy s : all_strategies()) {
        if (strategy_name(s) == name) return s;
    }
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

const std::vector<Strategy>& all_strategies() {
    static const std::vector<Strategy> all = {Strategy::BaselineRkd, Strategy::VanillaMkd,
                                              Strategy::IibOnly,     Strategy::ReMkd,
                                              Strategy::IibKd,       Strategy::Edbl};
    return all;
}

StrategyPlan strategy_plan(Strategy s) {
    switch (s) {
        case Strategy::BaselineRkd: return {DataMode::Raw, false, DataMode::Raw, false};
        case Strategy::VanillaMkd: return {DataMode::VanillaMix, false, DataMode::Raw, false};
        case Strategy::IibOnly: return {DataMode::Raw, true, DataMode::Raw, true};
        case Strategy::ReMkd: return {DataMode::ResampledMix, false, DataMode::Raw, false};
        case Strategy::IibKd: return {DataMode::Raw, true, DataMode::Raw, false};
        case Strategy::Edbl: return {DataMode::ResampledMix, true, DataMode::ResampledMix, false};
    }
    throw std::logic_error("strategy_plan: unknown strategy");
}

double lr_at(double base, const std::vector<std::size_t>& decay_epochs, std::size_t epoch) {
    double lr = base;
    for (std::size_t d : decay_epochs) {
        if (epoch >= d) lr *= 0.1;
    }
    return lr;
}

AssembledBatch assemble_batch(const std::vector<MixedSample>& batch, const ClassRegistry& registry,
                              std::size_t class_count) {
    if (batch.empty()) throw std::invalid_argument("assemble_batch: empty batch");
    AssembledBatch out;
    out.inputs = Matrix(batch.size(), batch.front().features.cols());
    out.labels_i = Matrix(batch.size(), class_count, 0.0);
    out.labels_j = Matrix(batch.size(), class_count, 0.0);
    out.lambdas.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out.inputs.set_row(i, batch[i].features);
        out.labels_i(i, registry.index_of(batch[i].class_i)) = 1.0;
        out.labels_j(i, registry.index_of(batch[i].class_j)) = 1.0;
        out.lambdas.push_back(batch[i].lambda);
        out.class_i.push_back(batch[i].class_i);
        out.class_j.push_back(batch[i].class_j);
    }
    return out;
}

namespace {

// Raw samples as degenerate mixed samples (lambda = 1, both sources equal).
std::vector<MixedSample> degenerate_batch(const std::vector<const Sample*>& samples) {
    std::vector<MixedSample> out;
    out.reserve(samples.size());
    for (const Sample* s : samples) {
        MixedSample m;
        m.features = s->features;
        m.class_i = m.class_j = s->class_id;
        m.task_i = m.task_j = s->task_id;
        m.lambda = 1.0;
        m.mix_type = MixType::NewNew;
        out.push_back(std::move(m));
    }
    return out;
}

// Shuffles the pool and slices it into batches of at most batch_size.
std::vector<std::vector<MixedSample>> raw_epoch_batches(const std::vector<Sample>& pool,
                                                        std::size_t batch_size, Rng& rng) {
    std::vector<const Sample*> order;
    order.reserve(pool.size());
    for (const auto& s : pool) order.push_back(&s);
    shuffle(order, rng);
    std::vector<std::vector<MixedSample>> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        batches.push_back(degenerate_batch({order.begin() + static_cast<std::ptrdiff_t>(start),
                                            order.begin() + static_cast<std::ptrdiff_t>(end)}));
    }
    return batches;
}

std::vector<std::vector<MixedSample>> build_phase_batches(DataMode mode,
                                                          const std::vector<Sample>& old_pool,
                                                          const std::vector<Sample>& new_pool,
                                                          double n_ratio, std::size_t current_task,
                                                          const TrainConfig& cfg, Rng& rng) {
    std::vector<std::vector<MixedSample>> batches;
    switch (mode) {
        case DataMode::Raw: {
            std::vector<Sample> pool = old_pool;
            pool.insert(pool.end(), new_pool.begin(), new_pool.end());
            return raw_epoch_batches(pool, cfg.batch_size, rng);
        }
        case DataMode::VanillaMix: {
            std::vector<Sample> pool = old_pool;
            pool.insert(pool.end(), new_pool.begin(), new_pool.end());
            for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
                batches.push_back(build_vanilla_batch(pool, cfg.batch_size, current_task, rng));
            }
            return batches;
        }
        case DataMode::ResampledMix: {
            for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
                batches.push_back(build_mixed_batch(old_pool, new_pool, n_ratio, cfg.resample, rng));
            }
            return batches;
        }
    }
    throw std::logic_error("build_phase_batches: unknown data mode");
}

void check_finite(double loss) {
    if (!std::isfinite(loss)) throw std::runtime_error("training produced a non-finite loss");
}

void emit_log(std::ostream* log, std::size_t task, const EpochLog& e) {
    if (!log) return;
    (*log) << "task=" << task << " phase=" << e.phase << " epoch=" << e.epoch << " lr=" << e.lr
           << " ce=" << e.ce << " kd=" << e.kd << " total=" << e.total << "\n";
}

}  // namespace

void phase1_mkd(Model& model, const FrozenModel* frozen,
                const std::vector<std::vector<MixedSample>>& batches, const ClassRegistry& registry,
                const TrainConfig& cfg, TaskReport& report, std::ostream* log) {
    if (batches.empty()) throw std::invalid_argument("phase1_mkd: no batches");
    const std::size_t m = frozen ? frozen->class_count() : 0;
    OptState opt;
    for (std::size_t epoch = 0; epoch < cfg.epochs_phase1; ++epoch) {
        const double lr = lr_at(cfg.lr_phase1, cfg.lr_decay_epochs_phase1, epoch);
        double ce_sum = 0.0;
        double kd_sum = 0.0;
        double total_sum = 0.0;
        for (const auto& mixed : batches) {
            const AssembledBatch b = assemble_batch(mixed, registry, model.class_count());
            const ForwardTrace trace = model.forward(b.inputs);
            LossResult ce = mixup_ce_loss(trace.logits, b.labels_i, b.labels_j, b.lambdas);
            double total = ce.value;
            Matrix d_logits = ce.d_logits;
            double kd_value = 0.0;
            if (frozen) {
                const Matrix teacher = teacher_targets(mixed, *frozen);
                LossResult kd = kd_loss(trace.logits, teacher, cfg.kd, m);
                kd_value = kd.value;
                total += cfg.gamma1 * kd.value;
                d_logits.add_scaled(kd.d_logits, cfg.gamma1);
            }
            check_finite(total);
            const GradientSet grads = model.backward(trace, d_logits);
            sgd_step(model, grads, lr, cfg.momentum, cfg.weight_decay, opt);
            ce_sum += ce.value;
            kd_sum += kd_value;
            total_sum += total;
        }
        EpochLog e;
        e.phase = 1;
        e.epoch = epoch;
        e.lr = lr;
        e.ce = ce_sum / static_cast<double>(batches.size());
        e.kd = kd_sum / static_cast<double>(batches.size());
        e.total = total_sum / static_cast<double>(batches.size());
        report.epochs.push_back(e);
        emit_log(log, report.task_index, e);
    }
}

void phase2_balancing(Model& model, const FrozenModel& frozen,
                      const std::vector<Sample>& old_pool, const std::vector<Sample>& new_pool,
                      const std::map<int, double>& class_weights, const ClassRegistry& registry,
                      const TrainConfig& cfg, DataMode data_mode, double gamma2, Rng& rng,
                      TaskReport& report, std::ostream* log) {
    const std::size_t m = frozen.class_count();
    const double n_ratio = old_pool.empty() ? 1.0 : imbalance_ratio(old_pool, new_pool);
    OptState opt;
    for (std::size_t epoch = 0; epoch < cfg.epochs_phase2; ++epoch) {
        const double lr = lr_at(cfg.lr_phase2, cfg.lr_decay_epochs_phase2, epoch);
        // Fresh data every epoch: factors depend on the current model, and the
        // mixes carry fresh lambda draws.
        const auto batches = build_phase_batches(data_mode, old_pool, new_pool, n_ratio,
                                                 report.task_index, cfg, rng);
        double ce_sum = 0.0;
        double kd_sum = 0.0;
        double total_sum = 0.0;
        for (const auto& mixed : batches) {
            const AssembledBatch b = assemble_batch(mixed, registry, model.class_count());
            const ForwardTrace trace = model.forward(b.inputs);

            BalancingBatch bb;
            bb.student_logits = trace.logits;
            bb.teacher_logits = teacher_targets(mixed, frozen);
            bb.features = trace.features;
            bb.labels_i = b.labels_i;
            bb.labels_j = b.labels_j;
            bb.mix = b.lambdas;
            bb.class_term.reserve(mixed.size());
            for (std::size_t i = 0; i < mixed.size(); ++i) {
                const double wi = class_weights.at(b.class_i[i]);
                const double wj = class_weights.at(b.class_j[i]);
                bb.class_term.push_back(b.lambdas[i] * wi + (1.0 - b.lambdas[i]) * wj);
            }

            const BalancingResult res = overall_balancing_loss(bb, cfg.balance, gamma2, cfg.kd, m);
            check_finite(res.value);
            const GradientSet grads = model.backward(trace, res.d_logits);
            sgd_step(model, grads, lr, cfg.momentum, cfg.weight_decay, opt);
            ce_sum += res.ce_component;
            kd_sum += res.kd_component;
            total_sum += res.value;
        }
        EpochLog e;
        e.phase = 2;
        e.epoch = epoch;
        e.lr = lr;
        e.ce = ce_sum / static_cast<double>(batches.size());
        e.kd = kd_sum / static_cast<double>(batches.size());
        e.total = total_sum / static_cast<double>(batches.size());
        report.epochs.push_back(e);
        emit_log(log, report.task_index, e);
    }
}

TaskReport train_task(Model& model, const FrozenModel* frozen, const std::vector<Sample>& new_data,
                      ExemplarStore& store, const ClassRegistry& registry, const TrainConfig& cfg,
                      Rng& rng, std::ostream* log) {
    if (new_data.empty()) throw std::invalid_argument("train_task: no new data");
    const std::size_t task_index = new_data.front().task_id;
    for (const auto& s : new_data) {
        if (s.task_id != task_index) throw std::invalid_argument("train_task: mixed task ids");
    }
    if (task_index >= 1 && !frozen) throw std::logic_error("train_task: missing frozen model");
    if (task_index == 0 && frozen) throw std::logic_error("train_task: unexpected frozen model at task 0");

    TaskReport report;
    report.task_index = task_index;
    report.strategy = cfg.strategy;

    const StrategyPlan plan = cfg.plan();
    const std::vector<Sample> old_pool = store.all();

    if (!frozen) {
        // First task: plain cross-entropy training on the raw task data.
        const auto batches = build_phase_batches(DataMode::Raw, {}, new_data, 1.0, 0, cfg, rng);
        phase1_mkd(model, nullptr, batches, registry, cfg, report, log);
    } else {
        double n_ratio = 1.0;
        if (plan.phase1_data == DataMode::ResampledMix ||
            (plan.run_phase2 && plan.phase2_data == DataMode::ResampledMix)) {
            n_ratio = imbalance_ratio(old_pool, new_data);
        }
        report.imbalance = n_ratio;

        const auto batches =
            build_phase_batches(plan.phase1_data, old_pool, new_data, n_ratio, task_index, cfg, rng);
        phase1_mkd(model, frozen, batches, registry, cfg, report, log);

        if (plan.run_phase2 && cfg.epochs_phase2 > 0) {
            std::map<int, std::size_t> counts = count_by_class(old_pool);
            for (const auto& [cls, n] : count_by_class(new_data)) counts[cls] = n;
            const auto weights = class_weight(counts, cfg.balance.gamma);
            const double gamma2 = plan.zero_gamma2 ? 0.0 : cfg.gamma2;
            phase2_balancing(model, *frozen, old_pool, new_data, weights, registry, cfg,
                             plan.phase2_data, gamma2, rng, report, log);
        }
    }

    // Exemplar management: re-cap the memory for the enlarged class set, then
    // herd the new classes with the just-trained model.
    store.reduce(registry.size());
    const std::size_t cap = store.per_class_cap(registry.size());
    if (cap == 0) throw std::invalid_argument("train_task: memory budget below one exemplar per class");

    std::map<int, std::vector<Sample>> by_class;
    for (const auto& s : new_data) by_class[s.class_id].push_back(s);
    for (const auto& [cls, samples] : by_class) {
        store.add_class(cls, herd_select(samples, model, cap));
    }
    return report;
}

}  // namespace edbl

#include "edbl/protocol.hpp"

#include <algorithm>
#include <stdexcept>

namespace edbl {

ExemplarStore TaskStream::make_store() const {
    return protocol.kind == ProtocolKind::Base0 ? ExemplarStore::fixed_total(protocol.total_budget)
                                                : ExemplarStore::per_class(protocol.per_class_budget);
}

TaskStream split_stream(const Dataset& dataset, const Protocol& protocol, Rng& rng) {
    std::vector<int> classes = dataset.class_ids();
    if (classes.size() < 2) throw std::invalid_argument("split_stream: need at least two classes");
    if (protocol.phases == 0) throw std::invalid_argument("split_stream: zero phases");

    shuffle(classes, rng);

    // Sizes of the class chunk assigned to each task.
    std::vector<std::size_t> chunk_sizes;
    if (protocol.kind == ProtocolKind::Base0) {
        if (protocol.phases > classes.size()) {
            throw std::invalid_argument("split_stream: more phases than classes");
        }
        const std::size_t base = classes.size() / protocol.phases;
        for (std::size_t p = 0; p < protocol.phases; ++p) chunk_sizes.push_back(base);
        chunk_sizes.back() += classes.size() % protocol.phases;
    } else {
        const std::size_t first = (classes.size() + 1) / 2;
        const std::size_t incremental = classes.size() - first;
        if (protocol.phases > incremental) {
            throw std::invalid_argument("split_stream: more phases than incremental classes");
        }
        chunk_sizes.push_back(first);
        const std::size_t base = incremental / protocol.phases;
        for (std::size_t p = 0; p < protocol.phases; ++p) chunk_sizes.push_back(base);
        chunk_sizes.back() += incremental % protocol.phases;
    }

    std::map<int, std::size_t> task_of_class;
    TaskStream stream;
    stream.protocol = protocol;
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < chunk_sizes.size(); ++t) {
        Task task;
        for (std::size_t c = 0; c < chunk_sizes[t]; ++c) {
            task.classes.push_back(classes[cursor]);
            task_of_class[classes[cursor]] = t;
            ++cursor;
        }
        std::sort(task.classes.begin(), task.classes.end());
        stream.tasks.push_back(std::move(task));
    }

    for (const auto& s : dataset.train) {
        Sample copy = s;
        copy.task_id = task_of_class.at(s.class_id);
        stream.tasks[copy.task_id].train.push_back(std::move(copy));
    }
    for (const auto& s : dataset.test) {
        Sample copy = s;
        copy.task_id = task_of_class.at(s.class_id);
        stream.tasks[copy.task_id].test.push_back(std::move(copy));
    }
    return stream;
}

PhaseMetrics evaluate_phase(const Model& model, const ExemplarStore& store,
                            const ClassRegistry& registry, const TaskStream& stream,
                            std::size_t phase) {
    if (phase >= stream.tasks.size()) throw std::invalid_argument("evaluate_phase: phase out of range");

    std::vector<const Sample*> test;
    for (std::size_t t = 0; t <= phase; ++t) {
        for (const auto& s : stream.tasks[t].test) test.push_back(&s);
    }
    if (test.empty()) throw std::invalid_argument("evaluate_phase: no test data");

    Matrix inputs(test.size(), test.front()->features.cols());
    for (std::size_t i = 0; i < test.size(); ++i) inputs.set_row(i, test[i]->features);

    const Matrix logits = model.forward(inputs).logits;
    const std::vector<int> nme = nme_classify(store, model, inputs);

    std::map<int, std::size_t> total_by_class;
    std::map<int, std::size_t> cnn_hits;
    std::map<int, std::size_t> nme_hits;
    std::size_t cnn_correct = 0;
    std::size_t nme_correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const int truth = test[i]->class_id;
        ++total_by_class[truth];

        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            if (logits(i, c) > logits(i, best)) best = c;
        }
        const int cnn_pred = registry.class_at(best);
        if (cnn_pred == truth) {
            ++cnn_correct;
            ++cnn_hits[truth];
        }
        if (nme[i] == truth) {
            ++nme_correct;
            ++nme_hits[truth];
        }
    }

    PhaseMetrics metrics;
    metrics.phase = phase;
    metrics.test_count = test.size();
    metrics.accuracy_cnn = static_cast<double>(cnn_correct) / static_cast<double>(test.size());
    metrics.accuracy_nme = static_cast<double>(nme_correct) / static_cast<double>(test.size());
    for (const auto& [cls, total] : total_by_class) {
        metrics.per_class_cnn[cls] = static_cast<double>(cnn_hits[cls]) / static_cast<double>(total);
        metrics.per_class_nme[cls] = static_cast<double>(nme_hits[cls]) / static_cast<double>(total);
    }
    return metrics;
}

double average_incremental_accuracy(const std::vector<PhaseMetrics>& metrics, InferenceMode mode) {
    if (metrics.empty()) throw std::domain_error("average_incremental_accuracy: no phases");
    double sum = 0.0;
    for (const auto& m : metrics) sum += m.accuracy(mode);
    return sum / static_cast<double>(metrics.size());
}

}  // namespace edbl

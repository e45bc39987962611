#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "edbl/data.hpp"
#include "edbl/model.hpp"
#include "edbl/rehearsal.hpp"

namespace edbl {

enum class ProtocolKind { Base0, BaseHalf };

// Base0: every class arrives across `phases` tasks, rehearsal under a fixed
// total budget. BaseHalf: half the classes form a base task, the rest arrive
// across `phases` incremental tasks, with a per-class budget.
struct Protocol {
    ProtocolKind kind = ProtocolKind::Base0;
    std::size_t phases = 5;
    std::size_t total_budget = 2000;     // Base0
    std::size_t per_class_budget = 20;   // BaseHalf
};

struct Task {
    std::vector<int> classes;
    std::vector<Sample> train;
    std::vector<Sample> test;
};

struct TaskStream {
    Protocol protocol;
    std::vector<Task> tasks;

    ExemplarStore make_store() const;
};

// Shuffles the class order with the given rng, then assigns contiguous class
// chunks to tasks. When phases do not divide the incremental class count the
// last task takes the remainder.
TaskStream split_stream(const Dataset& dataset, const Protocol& protocol, Rng& rng);

enum class InferenceMode { Cnn, Nme };

struct PhaseMetrics {
    std::size_t phase = 0;
    std::size_t test_count = 0;
    double accuracy_cnn = 0.0;
    double accuracy_nme = 0.0;
    std::map<int, double> per_class_cnn;
    std::map<int, double> per_class_nme;

    double accuracy(InferenceMode mode) const {
        return mode == InferenceMode::Cnn ? accuracy_cnn : accuracy_nme;
    }
};

// Evaluates both inference modes on the union of the test splits of every
// task up to and including `phase`.
PhaseMetrics evaluate_phase(const Model& model, const ExemplarStore& store,
                            const ClassRegistry& registry, const TaskStream& stream,
                            std::size_t phase);

// Arithmetic mean of accuracy-on-seen over the given phases (first phase
// included).
double average_incremental_accuracy(const std::vector<PhaseMetrics>& metrics, InferenceMode mode);

}  // namespace edbl

#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "edbl/data.hpp"
#include "edbl/matrix.hpp"
#include "edbl/model.hpp"

namespace edbl {

enum class BudgetPolicy { FixedTotal, PerClass };

// Rehearsal memory: per-class exemplar lists kept in herding-selection order,
// so truncating a list keeps the best prefix.
class ExemplarStore {
public:
    static ExemplarStore fixed_total(std::size_t budget);
    static ExemplarStore per_class(std::size_t per_class_budget);
    // Deserialization path: rebuilds a store with the cap it was saved with.
    static ExemplarStore restore(BudgetPolicy policy, std::size_t budget, std::size_t cap);

    // Stores a herded list for a class (truncated to the current cap).
    void add_class(int class_id, std::vector<Sample> herded);

    // FixedTotal: re-caps every class to budget / total_class_count, dropping
    // from the tail of the herding order. PerClass: no-op.
    void reduce(std::size_t total_class_count);

    std::size_t per_class_cap(std::size_t total_class_count) const;

    const std::vector<Sample>& exemplars(int class_id) const;
    bool has_class(int class_id) const { return classes_.count(class_id) != 0; }
    std::vector<int> class_ids() const;  // ascending
    std::vector<Sample> all() const;     // flattened, class id ascending
    std::map<int, std::size_t> class_counts() const;
    std::size_t total_count() const;

    BudgetPolicy policy() const { return policy_; }
    std::size_t budget() const { return budget_; }
    std::size_t current_cap() const { return cap_; }

private:
    ExemplarStore(BudgetPolicy policy, std::size_t budget);
    void check_budget() const;

    BudgetPolicy policy_;
    std::size_t budget_;
    std::size_t cap_;
    std::map<int, std::vector<Sample>> classes_;
};

// Greedy herding: repeatedly pick the sample whose inclusion moves the
// running exemplar-feature mean closest to the class mean, both measured on
// L2-normalized features of the given model. Returns min(k, class size)
// samples in selection order. Deterministic: ties break on input order.
std::vector<Sample> herd_select(const std::vector<Sample>& class_samples, const Model& model,
                                std::size_t k);

// Unit-norm mean of a class's normalized exemplar features.
struct ClassMean {
    int class_id = 0;
    Matrix mean_feature;  // 1 x feature_dim, unit L2 norm
};

ClassMean class_mean(const ExemplarStore& store, const Model& model, int class_id);

// Nearest-mean-of-exemplars prediction for each query row (raw inputs;
// features are recomputed under the given model). Ties break toward the
// lowest class id.
std::vector<int> nme_classify(const ExemplarStore& store, const Model& model,
                              const Matrix& query_inputs);

}  // namespace edbl

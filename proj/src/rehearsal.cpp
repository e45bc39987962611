#include "edbl/rehearsal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace edbl {

ExemplarStore::ExemplarStore(BudgetPolicy policy, std::size_t budget)
    : policy_(policy), budget_(budget), cap_(budget) {
    if (budget == 0) throw std::invalid_argument("ExemplarStore: zero budget");
}

ExemplarStore ExemplarStore::fixed_total(std::size_t budget) {
    return ExemplarStore(BudgetPolicy::FixedTotal, budget);
}

ExemplarStore ExemplarStore::per_class(std::size_t per_class_budget) {
    return ExemplarStore(BudgetPolicy::PerClass, per_class_budget);
}

ExemplarStore ExemplarStore::restore(BudgetPolicy policy, std::size_t budget, std::size_t cap) {
    ExemplarStore store(policy, budget);
    store.cap_ = (policy == BudgetPolicy::PerClass) ? budget : cap;
    return store;
}

std::size_t ExemplarStore::per_class_cap(std::size_t total_class_count) const {
    if (policy_ == BudgetPolicy::PerClass) return budget_;
    if (total_class_count == 0) return budget_;
    return budget_ / total_class_count;
}

void ExemplarStore::add_class(int class_id, std::vector<Sample> herded) {
    if (classes_.count(class_id)) throw std::invalid_argument("ExemplarStore: class already stored");
    if (herded.size() > cap_) herded.resize(cap_);
    classes_[class_id] = std::move(herded);
    check_budget();
}

void ExemplarStore::reduce(std::size_t total_class_count) {
    if (policy_ == BudgetPolicy::PerClass) return;
    if (total_class_count == 0) throw std::invalid_argument("ExemplarStore::reduce: zero classes");
    cap_ = budget_ / total_class_count;
    for (auto& [id, list] : classes_) {
        if (list.size() > cap_) list.resize(cap_);
    }
    check_budget();
}

void ExemplarStore::check_budget() const {
    if (policy_ == BudgetPolicy::PerClass) {
        for (const auto& [id, list] : classes_) {
            if (list.size() > budget_) throw std::logic_error("ExemplarStore: per-class budget exceeded");
        }
    } else {
        if (total_count() > budget_) throw std::logic_error("ExemplarStore: total budget exceeded");
    }
}

const std::vector<Sample>& ExemplarStore::exemplars(int class_id) const {
    auto it = classes_.find(class_id);
    if (it == classes_.end()) throw std::invalid_argument("ExemplarStore: unknown class");
    return it->second;
}

std::vector<int> ExemplarStore::class_ids() const {
    std::vector<int> ids;
    for (const auto& [id, _] : classes_) ids.push_back(id);
    return ids;
}

std::vector<Sample> ExemplarStore::all() const {
    std::vector<Sample> out;
    for (const auto& [id, list] : classes_) out.insert(out.end(), list.begin(), list.end());
    return out;
}

std::map<int, std::size_t> ExemplarStore::class_counts() const {
    std::map<int, std::size_t> counts;
    for (const auto& [id, list] : classes_) counts[id] = list.size();
    return counts;
}

std::size_t ExemplarStore::total_count() const {
    std::size_t n = 0;
    for (const auto& [id, list] : classes_) n += list.size();
    return n;
}

namespace {

// Rows of model features, each L2-normalized (zero rows stay zero).
Matrix normalized_features(const Model& model, const std::vector<Sample>& samples) {
    Matrix inputs(samples.size(), samples.front().features.cols());
    for (std::size_t i = 0; i < samples.size(); ++i) inputs.set_row(i, samples[i].features);
    Matrix feats = model.forward(inputs).features;
    for (std::size_t i = 0; i < feats.rows(); ++i) {
        double norm = 0.0;
        for (std::size_t c = 0; c < feats.cols(); ++c) norm += feats(i, c) * feats(i, c);
        norm = std::sqrt(norm);
        if (norm > 1e-12) {
            for (std::size_t c = 0; c < feats.cols(); ++c) feats(i, c) /= norm;
        }
    }
    return feats;
}

Matrix normalize_row(Matrix row) {
    const double norm = l2_norm(row);
    if (norm > 1e-12) row.scale(1.0 / norm);
    return row;
}

}  // namespace

std::vector<Sample> herd_select(const std::vector<Sample>& class_samples, const Model& model,
                                std::size_t k) {
    if (k == 0) throw std::invalid_argument("herd_select: k must be at least 1");
    if (class_samples.empty()) throw std::invalid_argument("herd_select: empty class");

    const Matrix feats = normalized_features(model, class_samples);
    const std::size_t n = class_samples.size();
    const std::size_t dim = feats.cols();

    Matrix target(1, dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < dim; ++c) target(0, c) += feats(i, c);
    }
    target.scale(1.0 / static_cast<double>(n));

    std::vector<bool> chosen(n, false);
    std::vector<Sample> selected;
    Matrix running_sum(1, dim, 0.0);
    const std::size_t take = std::min(k, n);
    for (std::size_t step = 1; step <= take; ++step) {
        std::size_t best = n;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            double dist = 0.0;
            for (std::size_t c = 0; c < dim; ++c) {
                const double mean_c = (running_sum(0, c) + feats(i, c)) / static_cast<double>(step);
                const double diff = target(0, c) - mean_c;
                dist += diff * diff;
            }
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        chosen[best] = true;
        for (std::size_t c = 0; c < dim; ++c) running_sum(0, c) += feats(best, c);
        selected.push_back(class_samples[best]);
    }
    return selected;
}

ClassMean class_mean(const ExemplarStore& store, const Model& model, int class_id) {
    const auto& samples = store.exemplars(class_id);
    if (samples.empty()) throw std::logic_error("class_mean: class has no exemplars");
    const Matrix feats = normalized_features(model, samples);
    Matrix mean(1, feats.cols(), 0.0);
    for (std::size_t i = 0; i < feats.rows(); ++i) {
        for (std::size_t c = 0; c < feats.cols(); ++c) mean(0, c) += feats(i, c);
    }
    mean.scale(1.0 / static_cast<double>(feats.rows()));
    ClassMean out;
    out.class_id = class_id;
    out.mean_feature = normalize_row(std::move(mean));
    return out;
}

std::vector<int> nme_classify(const ExemplarStore& store, const Model& model,
                              const Matrix& query_inputs) {
    const auto ids = store.class_ids();
    if (ids.empty()) throw std::logic_error("nme_classify: empty store");
    std::vector<ClassMean> means;
    means.reserve(ids.size());
    for (int id : ids) {
        if (store.exemplars(id).empty()) throw std::logic_error("nme_classify: class without exemplars");
        means.push_back(class_mean(store, model, id));
    }

    Matrix feats = model.forward(query_inputs).features;
    std::vector<int> predictions(feats.rows());
    for (std::size_t i = 0; i < feats.rows(); ++i) {
        Matrix q = normalize_row(feats.row(i));
        double best_dist = std::numeric_limits<double>::infinity();
        int best_id = ids.front();
        for (const auto& cm : means) {
            double dist = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) {
                const double diff = q(0, c) - cm.mean_feature(0, c);
                dist += diff * diff;
            }
            if (dist < best_dist) {  // strict: ties keep the lower class id
                best_dist = dist;
                best_id = cm.class_id;
            }
        }
        predictions[i] = best_id;
    }
    return predictions;
}

}  // namespace edbl

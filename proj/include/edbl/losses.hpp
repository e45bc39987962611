#pragma once

#include <cstddef>
#include <vector>

#include "edbl/matrix.hpp"

namespace edbl {

// Probability row over the current class set; one-hot is the degenerate case.
struct SoftLabel {
    Matrix probs;  // 1 x classes

    static SoftLabel one_hot(std::size_t index, std::size_t classes);
    static SoftLabel from_row(Matrix row);  // validates the simplex constraint
    static SoftLabel mix(const SoftLabel& a, const SoftLabel& b, double lambda);

    std::size_t classes() const { return probs.cols(); }
};

struct KdConfig {
    double temperature = 2.0;
    // Multiplies the soft loss by t^2. Off by default; the distillation
    // objective is used exactly as written otherwise.
    bool squared_temperature_compensation = false;
};

// Scalar loss plus its gradient with respect to the raw logits. All batch
// losses are means over the batch and gradients carry the 1/batch factor.
struct LossResult {
    double value = 0.0;
    Matrix d_logits;
};

// Mean cross entropy of row-wise soft labels against softmax(logits).
LossResult ce_loss(const Matrix& logits, const Matrix& labels);

// Per-sample cross entropies, same convention but without the batch mean.
std::vector<double> ce_per_sample(const Matrix& logits, const Matrix& labels);

// Distillation loss over the first `old_classes` student columns. Teacher and
// student distributions are softmaxes at the given temperature; the student
// softmax is taken over the old-class slice only, so the gradient on new-class
// columns is exactly zero.
LossResult kd_loss(const Matrix& student_logits, const Matrix& teacher_logits,
                   const KdConfig& cfg, std::size_t old_classes);

// lambda * ce(logits, labels_i) + (1 - lambda) * ce(logits, labels_j).
LossResult mixup_ce_loss(const Matrix& logits, const Matrix& labels_i, const Matrix& labels_j,
                         double lambda);
// Per-sample mixing coefficients.
LossResult mixup_ce_loss(const Matrix& logits, const Matrix& labels_i, const Matrix& labels_j,
                         const std::vector<double>& lambdas);

Matrix one_hot_rows(const std::vector<std::size_t>& indices, std::size_t classes);

}  // namespace edbl

#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "edbl/losses.hpp"
#include "edbl/matrix.hpp"

namespace edbl {

// Settings for influence-balanced re-weighting.
struct BalanceConfig {
    double alpha = 5e-6;    // trade-off between the classification and distillation factors
    double gamma = 100.0;   // total mass of the class-wise re-weighting terms
    double epsilon = 1e-8;  // floor applied to a factor before dividing by it
    std::map<int, std::size_t> class_counts;  // raw per-class sample counts for the current task
};

// Influence-balance weighting factor of one sample: the L1 magnitude of its
// head-layer cross-entropy gradient, |f(x) - y|_1 * |h|_1.
double ib_factor(const Matrix& probs, const SoftLabel& label, const Matrix& h);

// Joint incremental factor: L1 norm of the summed head gradients of the
// classification and distillation losses at temperature 1. The classification
// term uses the softmax over all classes (f_full); the distillation term uses
// the softmax over the old-class logit slice (f_old) against the teacher
// distribution f_prev, matching how each loss actually normalizes.
double iib_factor_joint(const Matrix& f_full, const Matrix& f_old, const Matrix& f_prev,
                        const SoftLabel& label, const Matrix& h);
// Convenience form that reads the old-class slice out of f_t for both terms.
double iib_factor_joint(const Matrix& f_t, const Matrix& f_prev, const SoftLabel& label,
                        const Matrix& h);

// Decomposed factor: |f_full - y|_1 * |h|_1 + alpha * |f_old - f_prev|_1 * |h|_1.
// alpha = 0 reduces to ib_factor.
double iib_factor(const Matrix& f_full, const Matrix& f_old, const Matrix& f_prev,
                  const SoftLabel& label, const Matrix& h, double alpha);
double iib_factor(const Matrix& f_t, const Matrix& f_prev, const SoftLabel& label,
                  const Matrix& h, double alpha);

// Decomposed factor of a mixed sample: the label is the lambda-blend of the
// two source labels.
double iib_factor_mixed(const Matrix& f_full, const Matrix& f_old, const Matrix& f_prev,
                        const SoftLabel& label_i, const SoftLabel& label_j, double lambda,
                        const Matrix& h, double alpha);

// Class-wise re-weighting terms: weight of class k is
// gamma * (1/n_k) / sum_i (1/n_i); the weights sum to gamma and rarer classes
// receive strictly larger weights.
std::map<int, double> class_weight(const std::map<int, std::size_t>& class_counts, double gamma);

// Influence-balanced loss of one sample: class_term * ce / max(factor, epsilon).
double iib_loss(double per_sample_ce, double factor, double class_term, double epsilon);

// One balancing-phase batch. labels_i/labels_j are soft label rows per sample,
// mix holds the per-sample blend coefficients, and class_term holds the
// already-blended class re-weighting term of each sample.
struct BalancingBatch {
    Matrix student_logits;  // batch x (m + n)
    Matrix teacher_logits;  // batch x m
    Matrix features;        // batch x feature_dim
    Matrix labels_i;        // batch x (m + n)
    Matrix labels_j;        // batch x (m + n)
    std::vector<double> mix;
    std::vector<double> class_term;
};

struct BalancingResult {
    double value = 0.0;
    Matrix d_logits;
    std::vector<double> factors;         // per-sample decomposed factors
    std::vector<double> ce;              // per-sample cross entropies
    std::vector<double> sample_weights;  // class_term / max(factor, epsilon)
    double ce_component = 0.0;           // mean weighted ce part
    double kd_component = 0.0;           // mean distillation part (unscaled by gamma2)
};

// Balancing loss: mean over the batch of
//   class_term * ce / max(factor, epsilon) + gamma2 * kd.
// Factors are recomputed from the given logits and then treated as constants;
// the returned gradient does not differentiate through them.
BalancingResult overall_balancing_loss(const BalancingBatch& batch, const BalanceConfig& cfg,
                                       double gamma2, const KdConfig& kd,
                                       std::size_t old_classes);

// Same loss with externally pinned per-sample factors.
BalancingResult overall_balancing_loss_with_factors(const BalancingBatch& batch,
                                                    const std::vector<double>& factors,
                                                    const BalanceConfig& cfg, double gamma2,
                                                    const KdConfig& kd, std::size_t old_classes);

}  // namespace edbl
